// Python bindings for the p3lm core: order sampling, mask construction,
// span masking, synthetic data, metrics, selfchecks, and a model wrapper
// covering init/load/save, logits, scoring, loss, and beam generation.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <filesystem>

#include "p3lm/checkpoint.hpp"
#include "p3lm/data.hpp"
#include "p3lm/inference.hpp"
#include "p3lm/metrics.hpp"
#include "p3lm/model.hpp"
#include "p3lm/order.hpp"
#include "p3lm/rng.hpp"
#include "p3lm/selfcheck.hpp"
#include "p3lm/tokens.hpp"
#include "p3lm/training.hpp"

namespace py = pybind11;
using namespace p3lm;

namespace {

DecodeOrder order_from_positions(const std::vector<int>& positions) {
  DecodeOrder o;
  o.positions = positions;
  o.branch = o.is_identity() ? OrderBranch::kL2R : OrderBranch::kURP;
  o.validate();
  return o;
}

py::list mask_to_rows(const MaskMatrix& m) {
  py::list rows;
  for (std::int64_t r = 0; r < m.rows(); ++r) {
    py::list row;
    for (std::int64_t c = 0; c < m.cols(); ++c) row.append(static_cast<int>(m.at(r, c)));
    rows.append(row);
  }
  return rows;
}

py::dict masks_to_dict(const RelativeOrderMasks& masks) {
  py::dict d;
  d["target_len"] = masks.target_len;
  d["streams"] = masks.streams;
  d["main"] = mask_to_rows(masks.main);
  py::list query;
  for (const auto& q : masks.query) query.append(mask_to_rows(q));
  d["query"] = query;
  return d;
}

py::list array_to_rows(const DenseArray& a) {
  py::list rows;
  for (std::int64_t r = 0; r < a.rows(); ++r) {
    py::list row;
    for (std::int64_t c = 0; c < a.cols(); ++c) row.append(a.at(r, c));
    rows.append(row);
  }
  return rows;
}

// Thin ID-space model wrapper. Sequence arguments are regular token ids; the
// wrapper appends the end token where decoding conventions require it.
class PyModel {
 public:
  PyModel(Model model) : model_(std::move(model)) {}

  static PyModel create(int layers, int hidden, int ffn, int heads, int vocab, int streams,
                        int max_positions, bool share_stream_params, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.layers = layers;
    cfg.hidden = hidden;
    cfg.ffn = ffn;
    cfg.heads = heads;
    cfg.vocab = vocab;
    cfg.streams = streams;
    cfg.max_positions = max_positions;
    cfg.share_stream_params = share_stream_params;
    return PyModel(Model::init(cfg, seed));
  }

  static PyModel load(const std::string& dir) {
    const ModelConfig cfg = read_model_manifest(dir + "/model.txt");
    Model m = Model::init(cfg, 0);
    load_checkpoint_into(dir + "/model.bin", m.params);
    return PyModel(std::move(m));
  }

  void save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    write_model_manifest(dir + "/model.txt", model_.cfg);
    save_checkpoint(dir + "/model.bin", model_.params);
  }

  py::dict config() const {
    py::dict d;
    d["layers"] = model_.cfg.layers;
    d["hidden"] = model_.cfg.hidden;
    d["ffn"] = model_.cfg.ffn;
    d["heads"] = model_.cfg.heads;
    d["vocab"] = model_.cfg.vocab;
    d["streams"] = model_.cfg.streams;
    d["max_positions"] = model_.cfg.max_positions;
    d["share_stream_params"] = model_.cfg.share_stream_params;
    return d;
  }

  // Stream logits for explicit source/target/order; no tokens are appended.
  py::list logits(const std::vector<int>& source, const std::vector<int>& target,
                  const std::vector<int>& positions, int stream) const {
    const DecodeOrder order = order_from_positions(positions);
    const RelativeOrderMasks masks = build_masks(order, model_.cfg.streams);
    if (stream < 1 || stream > model_.cfg.streams)
      throw ConsistencyError("logits: stream out of range");
    TapeT<float> tape(const_cast<ParamStoreT<float>*>(&model_.params));
    auto enc = encode(tape, model_, source);
    auto out = decoder_forward(tape, model_, enc, target, order, masks);
    return array_to_rows(out.stream_logits[static_cast<std::size_t>(stream - 1)].val());
  }

  double score(const std::vector<int>& source, const std::vector<int>& target) const {
    std::vector<int> src = source;
    src.push_back(tokens::kEos);
    std::vector<int> tgt = target;
    tgt.push_back(tokens::kEos);
    const DecodeOrder order = DecodeOrder::identity(static_cast<int>(tgt.size()));
    return score_sequence(model_, src, tgt, order, 1);
  }

  py::list generate(const std::vector<int>& source, int beam, int max_len, int min_len,
                    double length_penalty) const {
    std::vector<int> src = source;
    src.push_back(tokens::kEos);
    BeamConfig cfg;
    cfg.beam = beam;
    cfg.max_len = max_len;
    cfg.min_len = min_len;
    cfg.length_penalty = length_penalty;
    py::list out;
    for (const Hypothesis& h : beam_search(model_, src, cfg)) {
      py::dict d;
      d["tokens"] = h.tokens;
      d["logprob"] = h.logprob;
      d["score"] = h.score;
      d["ends_with_eos"] = h.ends_with_eos;
      out.append(d);
    }
    return out;
  }

  py::dict loss(const std::vector<std::pair<std::vector<int>, std::vector<int>>>& pairs,
                const std::string& order_dist, double alpha, int orders_per_instance,
                std::uint64_t seed) const {
    Dataset data;
    for (const auto& [src, tgt] : pairs) data.instances.push_back(Instance{src, tgt});
    RngStream rng = RngStream(seed).derive("py-loss");
    const std::vector<Batch> batches =
        make_batches(data, static_cast<int>(data.instances.size()),
                     order_kind_from_string(order_dist), alpha, orders_per_instance, rng);
    if (batches.size() != 1) throw DataError("loss: expected one batch");
    TapeT<float> tape(const_cast<ParamStoreT<float>*>(&model_.params));
    const LossReport rep = p3lm_loss(tape, model_, batches[0], order_kind_from_string(order_dist),
                                     alpha);
    py::dict d;
    d["total"] = rep.total;
    d["per_stream"] = rep.per_stream;
    d["loss_l2r"] = rep.loss_l2r;
    d["loss_urp"] = rep.loss_urp;
    d["token_count"] = rep.token_count;
    d["mean_log_prior"] = rep.mean_log_prior;
    return d;
  }

 private:
  Model model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "probabilistically permuted prophet language model core";

  py::register_exception<ShapeError>(m, "ShapeError");
  py::register_exception<MaskError>(m, "MaskError");
  py::register_exception<NumericError>(m, "NumericError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<ConsistencyError>(m, "ConsistencyError");

  m.attr("BOS") = tokens::kBos;
  m.attr("EOS") = tokens::kEos;
  m.attr("MASK") = tokens::kMask;
  m.attr("PAD") = tokens::kPad;
  m.attr("UNK") = tokens::kUnk;
  m.attr("NUM_SPECIALS") = tokens::kNumSpecials;

  // ---- orders and masks ----
  m.def(
      "sample_order",
      [](const std::string& kind, int length, double alpha, std::uint64_t seed) {
        RngStream rng = RngStream(seed).derive("py-order");
        const DecodeOrder o = sample_order(order_kind_from_string(kind), length, alpha, rng);
        return py::make_tuple(o.positions, to_string(o.branch));
      },
      py::arg("kind"), py::arg("length"), py::arg("alpha") = 0.5, py::arg("seed") = 1,
      "Draw (positions, branch) from the order distribution.");
  m.def(
      "identity_order",
      [](int length) { return DecodeOrder::identity(length).positions; },
      py::arg("length"));
  m.def(
      "log_prior",
      [](const std::string& kind, double alpha, const std::vector<int>& positions) {
        return log_prior(order_kind_from_string(kind), alpha, order_from_positions(positions));
      },
      py::arg("kind"), py::arg("alpha"), py::arg("positions"));
  m.def(
      "step_index",
      [](const std::vector<int>& positions) { return step_index(order_from_positions(positions)); },
      py::arg("positions"), "Inverse permutation: step at which each position is decoded.");
  m.def(
      "build_masks",
      [](const std::vector<int>& positions, int streams) {
        return masks_to_dict(build_masks(order_from_positions(positions), streams));
      },
      py::arg("positions"), py::arg("streams"));
  m.def(
      "dump_masks",
      [](const std::vector<int>& positions, int streams) {
        const DecodeOrder o = order_from_positions(positions);
        return dump_masks(o, build_masks(o, streams));
      },
      py::arg("positions"), py::arg("streams"));
  m.def(
      "parse_masks",
      [](const std::string& text) {
        const ParsedMasks p = parse_masks(text);
        py::dict d = masks_to_dict(p.masks);
        d["positions"] = p.order.positions;
        return d;
      },
      py::arg("text"));

  // ---- data ----
  m.def(
      "apply_span_mask",
      [](const std::vector<int>& ids, int vocab_size, std::uint64_t seed, int window,
         int span_len, double mask_frac) {
        SpanMaskSpec spec;
        spec.window = window;
        spec.span_len = span_len;
        spec.mask_frac = mask_frac;
        RngStream rng = RngStream(seed).derive("py-span");
        SpanMaskResult r = apply_span_mask(ids, spec, vocab_size, rng);
        return py::make_tuple(r.source, r.target, r.spans);
      },
      py::arg("ids"), py::arg("vocab_size"), py::arg("seed") = 1, py::arg("window") = 64,
      py::arg("span_len") = 9, py::arg("mask_frac") = 9.0 / 64.0);
  m.def(
      "gen_synthetic",
      [](const std::string& task, int regular_vocab, int len_min, int len_max, int count,
         std::uint64_t seed) {
        RngStream rng = RngStream(seed).derive("py-synth");
        const Dataset d =
            gen_synthetic(synth_task_from_string(task), regular_vocab, len_min, len_max, count, rng);
        py::list out;
        for (const auto& inst : d.instances) out.append(py::make_tuple(inst.source, inst.target));
        return out;
      },
      py::arg("task"), py::arg("regular_vocab"), py::arg("len_min"), py::arg("len_max"),
      py::arg("count"), py::arg("seed") = 1);

  py::class_<Vocabulary>(m, "Vocab")
      .def_static("from_file", &Vocabulary::from_file, py::arg("path"))
      .def_static("synthetic", &Vocabulary::synthetic, py::arg("regular_count"))
      .def("save", &Vocabulary::save, py::arg("path"))
      .def("size", &Vocabulary::size)
      .def("regular_count", &Vocabulary::regular_count)
      .def("token", &Vocabulary::token, py::arg("id"))
      .def("id_or_unk", &Vocabulary::id_or_unk, py::arg("token"))
      .def("encode_line", &Vocabulary::encode_line, py::arg("line"))
      .def("decode", &Vocabulary::decode, py::arg("ids"), py::arg("strip_specials") = true);

  // ---- metrics ----
  m.def(
      "rouge_l",
      [](const std::vector<int>& cand, const std::vector<int>& ref) {
        const RougeL r = rouge_l(cand, ref);
        py::dict d;
        d["precision"] = r.precision;
        d["recall"] = r.recall;
        d["f1"] = r.f1;
        d["lcs"] = r.lcs;
        return d;
      },
      py::arg("candidate"), py::arg("reference"));
  m.def("token_accuracy", &token_accuracy, py::arg("candidate"), py::arg("reference"));
  m.def("exact_match", &exact_match, py::arg("candidate"), py::arg("reference"));
  m.def(
      "corpus_metrics",
      [](const std::vector<std::vector<int>>& cands, const std::vector<std::vector<int>>& refs) {
        const CorpusMetrics c = corpus_metrics(cands, refs);
        py::dict d;
        d["token_accuracy"] = c.token_accuracy;
        d["exact_match"] = c.exact_match;
        d["rouge_l_f1"] = c.rouge_l_f1;
        d["pairs"] = c.pairs;
        d["reference_tokens"] = c.reference_tokens;
        return d;
      },
      py::arg("candidates"), py::arg("references"));

  // ---- selfcheck ----
  m.def(
      "selfcheck",
      [](std::uint64_t seed) {
        py::list out;
        for (const CheckResult& r : run_all_selfchecks(seed)) {
          py::dict d;
          d["name"] = r.name;
          d["passed"] = r.pass;
          d["detail"] = r.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 123);

  // ---- model ----
  py::class_<PyModel>(m, "Model")
      .def_static("create", &PyModel::create, py::arg("layers") = 2, py::arg("hidden") = 64,
                  py::arg("ffn") = 128, py::arg("heads") = 4, py::arg("vocab") = 64,
                  py::arg("streams") = 3, py::arg("max_positions") = 256,
                  py::arg("share_stream_params") = true, py::arg("seed") = 1)
      .def_static("load", &PyModel::load, py::arg("dir"))
      .def("save", &PyModel::save, py::arg("dir"))
      .def("config", &PyModel::config)
      .def("logits", &PyModel::logits, py::arg("source"), py::arg("target"), py::arg("positions"),
           py::arg("stream") = 1)
      .def("score", &PyModel::score, py::arg("source"), py::arg("target"))
      .def("generate", &PyModel::generate, py::arg("source"), py::arg("beam") = 5,
           py::arg("max_len") = 32, py::arg("min_len") = 1, py::arg("length_penalty") = 1.2)
      .def("loss", &PyModel::loss, py::arg("pairs"), py::arg("order_dist") = "alpha",
           py::arg("alpha") = 0.5, py::arg("orders_per_instance") = 1, py::arg("seed") = 1);
}
