// p3lm command line: train, decode, score, and inspect permuted prophet
// language models. Logs go to stderr; data goes to files (or stdout when a
// path is "-"). Exit codes: 0 success, 1 usage/config, 2 data, 3 numeric or
// internal consistency failure, 4 selfcheck failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "p3lm/checkpoint.hpp"
#include "p3lm/data.hpp"
#include "p3lm/errors.hpp"
#include "p3lm/inference.hpp"
#include "p3lm/metrics.hpp"
#include "p3lm/model.hpp"
#include "p3lm/oracles.hpp"
#include "p3lm/order.hpp"
#include "p3lm/rng.hpp"
#include "p3lm/runconfig.hpp"
#include "p3lm/selfcheck.hpp"
#include "p3lm/tokens.hpp"
#include "p3lm/training.hpp"

namespace {

using namespace p3lm;

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// An output sink that is either a file or stdout ("-").
class Sink {
 public:
  explicit Sink(const std::string& path) : path_(path) {
    if (path_ != "-") {
      file_.open(path_, std::ios::trunc);
      if (!file_) throw DataError("cannot write '" + path_ + "'");
    }
  }
  std::ostream& stream() { return path_ == "-" ? std::cout : file_; }
  void finish() {
    stream().flush();
    if (path_ != "-" && !file_) throw DataError("write to '" + path_ + "' failed");
  }

 private:
  std::string path_;
  std::ofstream file_;
};

// ---- shared config blocks ----------------------------------------------------

const std::set<std::string> kTrainKeys = {
    "lr",        "warmup",    "batch_size", "epochs",           "max_steps",
    "alpha",     "order_dist", "orders_per_instance", "grad_clip", "seed",
    "shuffle",   "divergence_threshold"};

const std::set<std::string> kModelKeys = {"layers", "hidden",        "ffn",
                                          "heads",  "streams",       "max_positions",
                                          "share_stream_params"};

std::set<std::string> merge_keys(std::initializer_list<std::set<std::string>> sets) {
  std::set<std::string> out;
  for (const auto& s : sets) out.insert(s.begin(), s.end());
  return out;
}

RunConfig load_config(const std::set<std::string>& allowed, const std::string& file,
                      const std::vector<std::string>& sets) {
  RunConfig cfg(allowed);
  if (!file.empty()) cfg.load_file(file);
  for (const auto& assignment : sets) cfg.apply_override(assignment);
  return cfg;
}

TrainingConfig training_from(const RunConfig& cfg) {
  TrainingConfig t;
  t.lr = cfg.get_double("lr", t.lr);
  t.warmup = cfg.get_int("warmup", t.warmup);
  t.batch_size = cfg.get_int("batch_size", t.batch_size);
  t.epochs = cfg.get_int("epochs", t.epochs);
  t.max_steps = cfg.get_int("max_steps", t.max_steps);
  t.alpha = cfg.get_double("alpha", t.alpha);
  t.order_dist = order_kind_from_string(cfg.get_string("order_dist", "alpha"));
  t.orders_per_instance = cfg.get_int("orders_per_instance", t.orders_per_instance);
  t.grad_clip = cfg.get_double("grad_clip", t.grad_clip);
  t.seed = cfg.get_u64("seed", t.seed);
  t.shuffle = cfg.get_bool("shuffle", t.shuffle);
  t.divergence_threshold = cfg.get_double("divergence_threshold", t.divergence_threshold);
  t.validate();
  return t;
}

ModelConfig model_from(const RunConfig& cfg, int vocab) {
  ModelConfig m;
  m.layers = cfg.get_int("layers", 2);
  m.hidden = cfg.get_int("hidden", 64);
  m.ffn = cfg.get_int("ffn", 128);
  m.heads = cfg.get_int("heads", 4);
  m.streams = cfg.get_int("streams", 3);
  m.max_positions = cfg.get_int("max_positions", 256);
  m.share_stream_params = cfg.get_bool("share_stream_params", true);
  m.vocab = vocab;
  return m;
}

bool has_any_model_key(const RunConfig& cfg) {
  for (const auto& k : kModelKeys)
    if (cfg.has(k)) return true;
  return false;
}

// Loads manifest + weights + vocabulary from a training output directory.
struct LoadedModel {
  Model model;
  Vocabulary vocab;
};

LoadedModel load_model_dir(const std::string& dir) {
  const ModelConfig cfg = read_model_manifest(dir + "/model.txt");
  LoadedModel out{Model::init(cfg, 0), Vocabulary::from_file(dir + "/vocab.txt")};
  load_checkpoint_into(dir + "/model.bin", out.model.params);
  if (out.vocab.size() != cfg.vocab)
    throw DataError("model dir '" + dir + "': vocabulary has " + std::to_string(out.vocab.size()) +
                    " entries but the manifest says " + std::to_string(cfg.vocab));
  return out;
}

// Runs training and writes the standard artifact set into out_dir.
void run_training(Model& model, const Dataset& data, const TrainingConfig& tcfg,
                  const RunConfig& cfg, const Vocabulary& vocab, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  cfg.write(out_dir + "/config_resolved.cfg");
  vocab.save(out_dir + "/vocab.txt");

  TrainResult result = train(model, data, tcfg, out_dir, [](const TrainStepLog& log) {
    if (log.step % 50 == 0)
      std::cerr << "step " << log.step << " loss " << fmt6(log.report.total) << " lr "
                << fmt6(log.lr) << " grad_norm " << fmt6(log.grad_norm) << "\n";
  });

  write_loss_log(out_dir + "/loss_log.csv", result);
  const LossSplit split = loss_split(result);
  write_loss_split(out_dir + "/loss_split", split);
  for (std::size_t i = 0; i < split.l2r.epoch.size(); ++i)
    std::cerr << "epoch " << split.l2r.epoch[i] << " loss_l2r " << fmt6(split.l2r.value[i])
              << "\n";
  for (std::size_t i = 0; i < split.urp.epoch.size(); ++i)
    std::cerr << "epoch " << split.urp.epoch[i] << " loss_urp " << fmt6(split.urp.value[i])
              << "\n";
  std::cerr << "trained " << result.steps.size() << " steps over " << data.instances.size()
            << " instances; artifacts in " << out_dir << "\n";
}

// ---- subcommands ---------------------------------------------------------------

struct PretrainArgs {
  std::string corpus, vocab_path, out_dir, config;
  std::vector<std::string> sets;
};

int run_pretrain(const PretrainArgs& a) {
  RunConfig cfg = load_config(merge_keys({kTrainKeys, kModelKeys,
                                          {"window", "span_len", "mask_frac"}}),
                              a.config, a.sets);
  SpanMaskSpec spec;
  spec.window = cfg.get_int("window", spec.window);
  spec.span_len = cfg.get_int("span_len", spec.span_len);
  spec.mask_frac = cfg.get_double("mask_frac", static_cast<double>(spec.span_len) / spec.window);
  spec.validate();

  const std::vector<std::string> lines = read_lines(a.corpus);
  Vocabulary vocab;
  if (!a.vocab_path.empty()) {
    vocab = Vocabulary::from_file(a.vocab_path);
  } else {
    std::set<std::string> seen;
    for (const auto& line : lines) {
      std::istringstream words(line);
      std::string w;
      while (words >> w) seen.insert(w);
    }
    vocab = Vocabulary::from_regular(std::vector<std::string>(seen.begin(), seen.end()));
  }

  const TrainingConfig tcfg = training_from(cfg);
  RngStream mask_rng = RngStream(tcfg.seed).derive("span-mask");
  Dataset data;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::vector<int> ids = vocab.encode_line(lines[i]);
    if (static_cast<int>(ids.size()) < spec.window) {
      ++skipped;
      continue;
    }
    RngStream line_rng = mask_rng.derive(static_cast<std::uint64_t>(i));
    SpanMaskResult masked = apply_span_mask(ids, spec, vocab.size(), line_rng);
    data.instances.push_back(Instance{std::move(masked.source), std::move(masked.target)});
  }
  if (skipped > 0)
    std::cerr << "skipped " << skipped << " line(s) shorter than the " << spec.window
              << "-token masking window\n";
  if (data.instances.empty())
    throw DataError("corpus '" + a.corpus + "': no line reaches the masking window");

  Model model = Model::init(model_from(cfg, vocab.size()), tcfg.seed);
  run_training(model, data, tcfg, cfg, vocab, a.out_dir);
  return 0;
}

struct FinetuneArgs {
  std::string data_path, task, vocab_path, init_dir, out_dir, config;
  int count = 2000;
  std::vector<std::string> sets;
};

int run_finetune(const FinetuneArgs& a) {
  RunConfig cfg = load_config(merge_keys({kTrainKeys, kModelKeys,
                                          {"len_min", "len_max", "vocab_size"}}),
                              a.config, a.sets);
  if (a.data_path.empty() == a.task.empty())
    throw ConfigError("finetune: give exactly one of --data or --task");

  const TrainingConfig tcfg = training_from(cfg);
  Vocabulary vocab;
  Dataset data;
  std::string dataset_manifest;

  if (!a.task.empty()) {
    const SynthTask task = synth_task_from_string(a.task);
    const int vocab_size = cfg.get_int("vocab_size", 32);
    const int len_min = cfg.get_int("len_min", 4);
    const int len_max = cfg.get_int("len_max", 16);
    vocab = Vocabulary::synthetic(vocab_size - tokens::kNumSpecials);
    RngStream rng = RngStream(tcfg.seed).derive("synthetic");
    data = gen_synthetic(task, vocab.regular_count(), len_min, len_max, a.count, rng);
    std::filesystem::create_directories(a.out_dir);
    write_dataset_manifest(a.out_dir + "/dataset_manifest.txt", task, tcfg.seed, a.count,
                           vocab.regular_count(), len_min, len_max);
  } else {
    const std::vector<std::string> lines = read_lines(a.data_path);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const std::size_t tab = lines[i].find('\t');
      if (tab == std::string::npos)
        throw DataError(a.data_path + ":" + std::to_string(i + 1) +
                        ": expected source<TAB>target");
      pairs.emplace_back(lines[i].substr(0, tab), lines[i].substr(tab + 1));
    }
    if (pairs.empty()) throw DataError(a.data_path + ": no instances");
    if (!a.vocab_path.empty()) {
      vocab = Vocabulary::from_file(a.vocab_path);
    } else {
      std::set<std::string> seen;
      for (const auto& [src, tgt] : pairs) {
        std::istringstream words(src + " " + tgt);
        std::string w;
        while (words >> w) seen.insert(w);
      }
      vocab = Vocabulary::from_regular(std::vector<std::string>(seen.begin(), seen.end()));
    }
    for (const auto& [src, tgt] : pairs)
      data.instances.push_back(Instance{vocab.encode_line(src), vocab.encode_line(tgt)});
  }

  Model model = Model::init(model_from(cfg, vocab.size()), tcfg.seed);
  if (!a.init_dir.empty()) {
    if (has_any_model_key(cfg))
      throw ConfigError("finetune: architecture comes from --init; do not set model keys");
    LoadedModel init = load_model_dir(a.init_dir);
    if (init.model.cfg.vocab != vocab.size())
      throw DataError("finetune: --init vocabulary (" + std::to_string(init.model.cfg.vocab) +
                      ") does not match the dataset vocabulary (" + std::to_string(vocab.size()) +
                      ")");
    model = std::move(init.model);
  }
  run_training(model, data, tcfg, cfg, vocab, a.out_dir);
  return 0;
}

struct GenerateArgs {
  std::string model_dir, input, output = "-", config;
  bool scores = false;
  std::vector<std::string> sets;
};

int run_generate(const GenerateArgs& a) {
  RunConfig cfg = load_config({"beam", "length_penalty", "min_len", "max_len"}, a.config, a.sets);
  BeamConfig bc;
  bc.beam = cfg.get_int("beam", bc.beam);
  bc.length_penalty = cfg.get_double("length_penalty", bc.length_penalty);
  bc.min_len = cfg.get_int("min_len", bc.min_len);
  bc.max_len = cfg.get_int("max_len", bc.max_len);
  bc.validate();

  LoadedModel lm = load_model_dir(a.model_dir);
  const std::vector<std::string> lines = read_lines(a.input);
  Sink out(a.output);
  int unfinished = 0;
  for (const auto& line : lines) {
    std::vector<int> source = lm.vocab.encode_line(line);
    source.push_back(tokens::kEos);
    const std::vector<Hypothesis> hyps = beam_search(lm.model, source, bc);
    const Hypothesis& best = hyps.front();
    if (!best.ends_with_eos) ++unfinished;
    out.stream() << lm.vocab.decode(best.tokens);
    if (a.scores) out.stream() << "\t" << fmt6(best.logprob);
    out.stream() << "\n";
  }
  out.finish();
  if (unfinished > 0)
    std::cerr << unfinished << " hypothesis(es) hit max_len without emitting "
              << lm.vocab.token(tokens::kEos) << "\n";
  std::cerr << "generated " << lines.size() << " line(s)\n";
  return 0;
}

struct ScoreArgs {
  std::string model_dir, input, output = "-", config;
  std::vector<std::string> sets;
};

int run_score(const ScoreArgs& a) {
  RunConfig cfg = load_config({}, a.config, a.sets);
  (void)cfg;
  LoadedModel lm = load_model_dir(a.model_dir);
  const std::vector<std::string> lines = read_lines(a.input);
  Sink out(a.output);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t tab = lines[i].find('\t');
    if (tab == std::string::npos)
      throw DataError(a.input + ":" + std::to_string(i + 1) + ": expected source<TAB>target");
    std::vector<int> source = lm.vocab.encode_line(lines[i].substr(0, tab));
    source.push_back(tokens::kEos);
    std::vector<int> target = lm.vocab.encode_line(lines[i].substr(tab + 1));
    if (target.empty())
      throw DataError(a.input + ":" + std::to_string(i + 1) + ": empty target");
    target.push_back(tokens::kEos);
    const DecodeOrder order = DecodeOrder::identity(static_cast<int>(target.size()));
    out.stream() << fmt6(score_sequence(lm.model, source, target, order, 1)) << "\n";
  }
  out.finish();
  std::cerr << "scored " << lines.size() << " pair(s)\n";
  return 0;
}

struct MaskDumpArgs {
  std::string order_csv, dist = "urp", output = "-";
  int length = 0;
  int streams = 2;
  double alpha = 0.5;
  std::uint64_t seed = 1;
  bool verify = false;
};

int run_mask_dump(const MaskDumpArgs& a) {
  DecodeOrder order;
  if (!a.order_csv.empty()) {
    if (a.length != 0) throw ConfigError("mask-dump: give --order or --length, not both");
    std::istringstream in(a.order_csv);
    std::string piece;
    while (std::getline(in, piece, ',')) {
      try {
        order.positions.push_back(std::stoi(piece));
      } catch (const std::exception&) {
        throw ConfigError("mask-dump: bad --order entry '" + piece + "'");
      }
    }
    order.branch = order.is_identity() ? OrderBranch::kL2R : OrderBranch::kURP;
    order.validate();
  } else {
    if (a.length < 1) throw ConfigError("mask-dump: give --order or a positive --length");
    RngStream rng = RngStream(a.seed).derive("mask-dump");
    order = sample_order(order_kind_from_string(a.dist), a.length, a.alpha, rng);
  }

  const RelativeOrderMasks masks = build_masks(order, a.streams);
  const std::string text = dump_masks(order, masks);
  Sink out(a.output);
  out.stream() << text;
  out.finish();

  if (a.verify) {
    const ParsedMasks parsed = parse_masks(text);
    const std::string again = dump_masks(parsed.order, parsed.masks);
    if (again != text)
      throw ConsistencyError("mask-dump: dump -> parse -> dump is not byte-identical");
    const RelativeOrderMasks rebuilt = build_masks(parsed.order, parsed.masks.streams);
    bool same = rebuilt.main.v == parsed.masks.main.v;
    for (std::size_t n = 0; same && n < rebuilt.query.size(); ++n)
      same = rebuilt.query[n].v == parsed.masks.query[n].v;
    if (!same)
      throw ConsistencyError("mask-dump: parsed masks do not match a fresh build for the order");
    std::cerr << "verify: ok\n";
  }
  return 0;
}

struct OrderStatsArgs {
  std::string dist = "urp", output = "-";
  int length = 3;
  int draws = 60000;
  double alpha = 0.5;
  std::uint64_t seed = 1;
};

int run_order_stats(const OrderStatsArgs& a) {
  if (a.length < 1) throw ConfigError("order-stats: --length must be >= 1");
  if (a.draws < 1) throw ConfigError("order-stats: --draws must be >= 1");
  const OrderKind kind = order_kind_from_string(a.dist);

  RngStream rng = RngStream(a.seed).derive("order-stats");
  std::map<std::vector<int>, int> counts;
  int identity = 0;
  for (int i = 0; i < a.draws; ++i) {
    const DecodeOrder o = sample_order(kind, a.length, a.alpha, rng);
    if (o.is_identity()) ++identity;
    if (a.length <= 4) counts[o.positions]++;
  }

  Sink out(a.output);
  out.stream() << "dist=" << to_string(kind) << "\n"
               << "length=" << a.length << "\n"
               << "draws=" << a.draws << "\n"
               << "identity_freq=" << fmt6(static_cast<double>(identity) / a.draws) << "\n";
  if (a.length <= 4) {
    long factorial = 1;
    for (int i = 2; i <= a.length; ++i) factorial *= i;
    for (const auto& [perm, count] : counts) {
      out.stream() << "perm ";
      for (std::size_t i = 0; i < perm.size(); ++i)
        out.stream() << (i ? "," : "") << perm[i];
      out.stream() << " count=" << count << " freq="
                   << fmt6(static_cast<double>(count) / a.draws) << "\n";
    }
    if (kind == OrderKind::kURP) {
      const double expected = static_cast<double>(a.draws) / static_cast<double>(factorial);
      double chi2 = 0.0;
      // permutations never drawn still contribute their expected mass
      chi2 += expected * static_cast<double>(factorial - static_cast<long>(counts.size()));
      for (const auto& [perm, count] : counts) {
        const double d = count - expected;
        chi2 += d * d / expected;
      }
      out.stream() << "chi2=" << fmt6(chi2) << " df=" << (factorial - 1) << "\n";
    }
  }
  out.finish();
  return 0;
}

struct SelfcheckArgs {
  std::string output = "-";
  std::uint64_t seed = 123;
};

int run_selfcheck(const SelfcheckArgs& a) {
  const std::vector<CheckResult> results = run_all_selfchecks(a.seed);
  Sink out(a.output);
  out.stream() << format_selfcheck_report(results);
  out.finish();
  for (const auto& r : results)
    if (!r.pass) return 4;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"permuted prophet language model trainer and decoder"};
  app.require_subcommand(1);

  PretrainArgs pre;
  CLI::App* pre_cmd = app.add_subcommand("pretrain", "span-mask pretraining on a text corpus");
  pre_cmd->add_option("--corpus", pre.corpus, "text corpus, one document per line")->required();
  pre_cmd->add_option("--vocab", pre.vocab_path, "vocabulary file (derived from the corpus when omitted)");
  pre_cmd->add_option("--out", pre.out_dir, "output directory")->required();
  pre_cmd->add_option("--config", pre.config, "key=value config file");
  pre_cmd->add_option("--set", pre.sets, "config override key=value (repeatable)");

  FinetuneArgs fin;
  CLI::App* fin_cmd = app.add_subcommand("finetune", "sequence-to-sequence training");
  fin_cmd->add_option("--data", fin.data_path, "paired data, source<TAB>target per line");
  fin_cmd->add_option("--task", fin.task, "synthetic task: copy, reverse, or infill");
  fin_cmd->add_option("--count", fin.count, "synthetic instance count");
  fin_cmd->add_option("--vocab", fin.vocab_path, "vocabulary file (derived from --data when omitted)");
  fin_cmd->add_option("--init", fin.init_dir, "warm start from this model directory");
  fin_cmd->add_option("--out", fin.out_dir, "output directory")->required();
  fin_cmd->add_option("--config", fin.config, "key=value config file");
  fin_cmd->add_option("--set", fin.sets, "config override key=value (repeatable)");

  GenerateArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("generate", "beam decode, one source per input line");
  gen_cmd->add_option("--model", gen.model_dir, "model directory")->required();
  gen_cmd->add_option("--input", gen.input, "source lines")->required();
  gen_cmd->add_option("--output", gen.output, "hypothesis lines ('-' = stdout)");
  gen_cmd->add_flag("--scores", gen.scores, "append a tab-separated log-probability column");
  gen_cmd->add_option("--config", gen.config, "key=value config file");
  gen_cmd->add_option("--set", gen.sets, "config override key=value (repeatable)");

  ScoreArgs sco;
  CLI::App* sco_cmd = app.add_subcommand("score", "log-probability of source<TAB>target pairs");
  sco_cmd->add_option("--model", sco.model_dir, "model directory")->required();
  sco_cmd->add_option("--input", sco.input, "source<TAB>target lines")->required();
  sco_cmd->add_option("--output", sco.output, "score lines ('-' = stdout)");
  sco_cmd->add_option("--config", sco.config, "key=value config file");
  sco_cmd->add_option("--set", sco.sets, "config override key=value (repeatable)");

  MaskDumpArgs md;
  CLI::App* md_cmd = app.add_subcommand("mask-dump", "dump attention masks for a decoding order");
  md_cmd->add_option("--order", md.order_csv, "explicit order, e.g. 2,3,1");
  md_cmd->add_option("--length", md.length, "sample an order of this length instead");
  md_cmd->add_option("--dist", md.dist, "sampling distribution: l2r, urp, alpha");
  md_cmd->add_option("--alpha", md.alpha, "mixture weight for --dist alpha");
  md_cmd->add_option("--seed", md.seed, "sampling seed");
  md_cmd->add_option("--streams", md.streams, "prediction stream count");
  md_cmd->add_option("--output", md.output, "dump destination ('-' = stdout)");
  md_cmd->add_flag("--verify", md.verify, "re-parse the dump and check byte identity");

  OrderStatsArgs os;
  CLI::App* os_cmd = app.add_subcommand("order-stats", "order sampler statistics");
  os_cmd->add_option("--length", os.length, "target length");
  os_cmd->add_option("--draws", os.draws, "number of samples");
  os_cmd->add_option("--dist", os.dist, "sampling distribution: l2r, urp, alpha");
  os_cmd->add_option("--alpha", os.alpha, "mixture weight for --dist alpha");
  os_cmd->add_option("--seed", os.seed, "sampling seed");
  os_cmd->add_option("--output", os.output, "stats destination ('-' = stdout)");

  SelfcheckArgs sc;
  CLI::App* sc_cmd = app.add_subcommand("selfcheck", "internal consistency suites");
  sc_cmd->add_option("--seed", sc.seed, "probe seed");
  sc_cmd->add_option("--output", sc.output, "report destination ('-' = stdout)");

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(pre_cmd)) return run_pretrain(pre);
    if (app.got_subcommand(fin_cmd)) return run_finetune(fin);
    if (app.got_subcommand(gen_cmd)) return run_generate(gen);
    if (app.got_subcommand(sco_cmd)) return run_score(sco);
    if (app.got_subcommand(md_cmd)) return run_mask_dump(md);
    if (app.got_subcommand(os_cmd)) return run_order_stats(os);
    if (app.got_subcommand(sc_cmd)) return run_selfcheck(sc);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const p3lm::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const p3lm::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
