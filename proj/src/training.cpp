#include "p3lm/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "p3lm/checkpoint.hpp"

namespace p3lm {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double warmup_lr(const TrainingConfig& cfg, int step /*1-based*/) {
  if (cfg.warmup > 0 && step <= cfg.warmup)
    return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup);
  return cfg.lr;
}

}  // namespace

void TrainingConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("training: lr must be > 0");
  if (warmup < 0) throw ConfigError("training: warmup must be >= 0");
  if (batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("training: epochs must be >= 0");
  if (max_steps < 0) throw ConfigError("training: max_steps must be >= 0");
  if (alpha < 0 || alpha > 1) throw ConfigError("training: alpha must be in [0, 1]");
  if (orders_per_instance < 1) throw ConfigError("training: orders_per_instance must be >= 1");
  if (grad_clip < 0) throw ConfigError("training: grad_clip must be >= 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1))
    throw ConfigError("training: adam betas must be in [0, 1)");
  if (!(adam_eps > 0)) throw ConfigError("training: adam_eps must be > 0");
  if (!(divergence_threshold > 0)) throw ConfigError("training: divergence_threshold must be > 0");
}

TrainResult train(Model& model, const Dataset& data, const TrainingConfig& cfg,
                  const std::string& out_dir,
                  const std::function<void(const TrainStepLog&)>& on_step) {
  cfg.validate();
  model.cfg.validate();

  namespace fs = std::filesystem;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_model_manifest((fs::path(out_dir) / "model.txt").string(), model.cfg);
  }

  // Adam moments, one pair of buffers per parameter, in double for stability.
  std::vector<std::vector<double>> m_buf, v_buf;
  m_buf.reserve(static_cast<std::size_t>(model.params.size()));
  v_buf.reserve(static_cast<std::size_t>(model.params.size()));
  for (int p = 0; p < model.params.size(); ++p) {
    m_buf.emplace_back(model.params.at(p).value.v.size(), 0.0);
    v_buf.emplace_back(model.params.at(p).value.v.size(), 0.0);
  }

  RngStream root(cfg.seed);
  TrainResult result;
  int step = 0;

  auto save_as = [&](const std::string& name) {
    if (out_dir.empty()) return;
    std::string path = (fs::path(out_dir) / name).string();
    save_checkpoint(path, model.params);
    result.checkpoint_paths.push_back(path);
  };

  for (int e = 0; e < cfg.epochs && !result.hit_max_steps; ++e) {
    Dataset epoch_data;
    epoch_data.instances.reserve(data.instances.size());
    if (cfg.shuffle && data.instances.size() > 1) {
      RngStream shuffle_rng = root.derive("shuffle").derive(static_cast<std::uint64_t>(e));
      std::vector<int> perm = shuffle_rng.permutation(static_cast<int>(data.instances.size()));
      for (int idx : perm)
        epoch_data.instances.push_back(data.instances[static_cast<std::size_t>(idx)]);
    } else {
      epoch_data.instances = data.instances;
    }
    RngStream order_rng = root.derive("orders").derive(static_cast<std::uint64_t>(e));
    std::vector<Batch> batches = make_batches(epoch_data, cfg.batch_size, cfg.order_dist,
                                              cfg.alpha, cfg.orders_per_instance, order_rng);

    for (const Batch& batch : batches) {
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        result.hit_max_steps = true;
        break;
      }
      TapeT<float> tape(&model.params);
      VarT<float> total;
      TrainStepLog log;
      log.report = p3lm_loss(tape, model, batch, cfg.order_dist, cfg.alpha, {}, &total);
      if (!std::isfinite(log.report.total) || log.report.total > cfg.divergence_threshold)
        throw NumericError("train", "divergence at step " + std::to_string(step + 1) + ": loss " +
                                        fmt_double(log.report.total) + " (threshold " +
                                        fmt_double(cfg.divergence_threshold) + ")");
      tape.backward(total);

      double sq_sum = 0.0;
      for (int p = 0; p < model.params.size(); ++p)
        for (float g : model.params.at(p).grad.v) sq_sum += static_cast<double>(g) * static_cast<double>(g);
      double norm = std::sqrt(sq_sum);
      double clip_scale = 1.0;
      if (cfg.grad_clip > 0 && norm > cfg.grad_clip) clip_scale = cfg.grad_clip / norm;

      ++step;
      double lr_t = warmup_lr(cfg, step);
      double bc1 = 1.0 - std::pow(cfg.adam_beta1, step);
      double bc2 = 1.0 - std::pow(cfg.adam_beta2, step);
      for (int p = 0; p < model.params.size(); ++p) {
        auto& value = model.params.at(p).value.v;
        auto& grad = model.params.at(p).grad.v;
        auto& m = m_buf[static_cast<std::size_t>(p)];
        auto& v = v_buf[static_cast<std::size_t>(p)];
        for (std::size_t i = 0; i < value.size(); ++i) {
          double g = static_cast<double>(grad[i]) * clip_scale;
          m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
          v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
          double update = lr_t * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
          value[i] = static_cast<float>(static_cast<double>(value[i]) - update);
        }
      }
      model.params.zero_grads();

      log.step = step;
      log.lr = lr_t;
      log.grad_norm = norm;
      if (on_step) on_step(log);
      result.steps.push_back(std::move(log));
    }
    if (!result.hit_max_steps) {
      result.epoch_end_step.push_back(step);
      save_as("checkpoint_epoch_" + std::to_string(e + 1) + ".bin");
    }
  }

  // Final state (or the untrained init when no step ran).
  save_as("model.bin");
  return result;
}

LossSplit loss_split(const TrainResult& result) {
  LossSplit split;
  std::size_t cursor = 0;
  for (std::size_t e = 0; e < result.epoch_end_step.size(); ++e) {
    int end = result.epoch_end_step[e];
    double sum_l2r = 0.0, sum_urp = 0.0;
    std::int64_t tok_l2r = 0, tok_urp = 0;
    for (; cursor < result.steps.size() && result.steps[cursor].step <= end; ++cursor) {
      const LossReport& r = result.steps[cursor].report;
      if (r.tokens_l2r > 0) {
        sum_l2r += r.loss_l2r * static_cast<double>(r.tokens_l2r);
        tok_l2r += r.tokens_l2r;
      }
      if (r.tokens_urp > 0) {
        sum_urp += r.loss_urp * static_cast<double>(r.tokens_urp);
        tok_urp += r.tokens_urp;
      }
    }
    if (tok_l2r > 0) {
      split.l2r.epoch.push_back(static_cast<int>(e) + 1);
      split.l2r.value.push_back(sum_l2r / static_cast<double>(tok_l2r));
    }
    if (tok_urp > 0) {
      split.urp.epoch.push_back(static_cast<int>(e) + 1);
      split.urp.value.push_back(sum_urp / static_cast<double>(tok_urp));
    }
  }
  return split;
}

void write_loss_log(const std::string& path, const TrainResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("loss log: cannot write " + path);
  int streams = result.steps.empty()
                    ? 0
                    : static_cast<int>(result.steps.front().report.per_stream.size());
  out << "step,total";
  for (int n = 1; n <= streams; ++n) out << ",stream_" << n;
  out << ",loss_l2r,loss_urp,orders_l2r,orders_urp,tokens,mean_log_prior,lr,grad_norm\n";
  for (const TrainStepLog& s : result.steps) {
    out << s.step << ',' << fmt_double(s.report.total);
    for (double v : s.report.per_stream) out << ',' << fmt_double(v);
    out << ',' << fmt_double(s.report.loss_l2r) << ',' << fmt_double(s.report.loss_urp) << ','
        << s.report.orders_l2r << ',' << s.report.orders_urp << ',' << s.report.token_count << ','
        << fmt_double(s.report.mean_log_prior) << ',' << fmt_double(s.lr) << ','
        << fmt_double(s.grad_norm) << '\n';
  }
  if (!out) throw DataError("loss log: write failed for " + path);
}

void write_loss_split(const std::string& path_prefix, const LossSplit& split) {
  auto write_series = [](const std::string& path, const LossSplitSeries& s) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("loss split: cannot write " + path);
    out << "# epoch loss\n";
    for (std::size_t i = 0; i < s.epoch.size(); ++i)
      out << s.epoch[i] << ' ' << fmt_double(s.value[i]) << '\n';
    if (!out) throw DataError("loss split: write failed for " + path);
  };
  write_series(path_prefix + "_l2r.dat", split.l2r);
  write_series(path_prefix + "_urp.dat", split.urp);
}

}  // namespace p3lm
