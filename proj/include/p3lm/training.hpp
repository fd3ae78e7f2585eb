#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "p3lm/data.hpp"
#include "p3lm/errors.hpp"
#include "p3lm/model.hpp"
#include "p3lm/order.hpp"

namespace p3lm {

struct TrainingConfig {
  double lr = 1e-3;
  int warmup = 100;       // linear warmup steps from 0, then constant
  int batch_size = 16;
  int epochs = 1;
  int max_steps = 0;      // 0 = run all epochs; otherwise stop after this many steps
  double alpha = 0.5;
  OrderKind order_dist = OrderKind::kAlpha;
  int orders_per_instance = 1;  // R
  double grad_clip = 1.0;       // global-norm ceiling; 0 disables
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double divergence_threshold = 1e4;
  std::uint64_t seed = 1;
  bool shuffle = true;

  void validate() const;
};

// Loss values for one batch. `total` is the optimized scalar: the mean over
// streams of per-token NLL summed over every (instance, order) pair, divided
// by the total target-token count. Branch components are token-weighted means
// over the orders whose sampled branch matched; NaN marks an absent branch.
// mean_log_prior reports log p(order) under the sampling distribution; it is
// constant with respect to the parameters and never optimized.
struct LossReport {
  double total = 0.0;
  std::vector<double> per_stream;
  double loss_l2r = std::numeric_limits<double>::quiet_NaN();
  double loss_urp = std::numeric_limits<double>::quiet_NaN();
  std::int64_t orders_l2r = 0;
  std::int64_t orders_urp = 0;
  std::int64_t tokens_l2r = 0;
  std::int64_t tokens_urp = 0;
  std::int64_t token_count = 0;  // target tokens summed over (instance, order) pairs
  double mean_log_prior = 0.0;
};

// Builds the training loss for one batch on the given tape. Instances with
// empty targets contribute nothing. When total_out is non-null it receives
// the differentiable scalar (shape {1}) for backward(). prior_kind/alpha only
// feed the reported mean_log_prior.
template <typename T>
LossReport p3lm_loss(TapeT<T>& tape, const ModelT<T>& model, const Batch& batch,
                     OrderKind prior_kind, double alpha, const ForwardOptions& opts = {},
                     VarT<T>* total_out = nullptr) {
  batch.validate();
  const int N = model.cfg.streams;
  LossReport rep;
  rep.per_stream.assign(static_cast<std::size_t>(N), 0.0);

  std::optional<VarT<T>> total_var;
  std::vector<double> stream_sums(static_cast<std::size_t>(N), 0.0);
  double sum_l2r = 0.0, sum_urp = 0.0, prior_sum = 0.0;
  std::int64_t order_count = 0;

  for (int i = 0; i < batch.size; ++i) {
    std::vector<int> target = batch.target_of(i);
    if (target.empty()) continue;  // filler row: contributes nothing
    try {
      EncodedSource<T> enc = encode(tape, model, batch.source_of(i), opts);
      for (const DecodeOrder& order : batch.orders[static_cast<std::size_t>(i)]) {
        RelativeOrderMasks masks = build_masks(order, N);
        DecoderOutput<T> out = decoder_forward(tape, model, enc, target, order, masks, opts);
        const int T_len = static_cast<int>(target.size());
        std::vector<int> permuted(static_cast<std::size_t>(T_len));
        for (int t = 1; t <= T_len; ++t)
          permuted[static_cast<std::size_t>(t - 1)] =
              target[static_cast<std::size_t>(order.positions[static_cast<std::size_t>(t - 1)] - 1)];
        double order_sum = 0.0;
        for (int n = 1; n <= N; ++n) {
          VarT<T> s = sum_all(nll_rows(out.stream_logits[static_cast<std::size_t>(n - 1)], permuted));
          double v = static_cast<double>(s.val().v[0]);
          stream_sums[static_cast<std::size_t>(n - 1)] += v;
          order_sum += v;
          total_var = total_var ? add(*total_var, s) : s;
        }
        rep.token_count += T_len;
        ++order_count;
        prior_sum += log_prior(prior_kind, alpha, order);
        if (order.branch == OrderBranch::kL2R) {
          ++rep.orders_l2r;
          rep.tokens_l2r += T_len;
          sum_l2r += order_sum;
        } else {
          ++rep.orders_urp;
          rep.tokens_urp += T_len;
          sum_urp += order_sum;
        }
      }
    } catch (const NumericError& e) {
      throw NumericError(e.op_name, "instance " + std::to_string(i) + ": " + e.what());
    }
  }

  if (rep.token_count == 0) throw DataError("loss: batch has no target tokens");
  double denom = static_cast<double>(N) * static_cast<double>(rep.token_count);
  VarT<T> total = scale(*total_var, static_cast<T>(1.0 / denom));
  rep.total = static_cast<double>(total.val().v[0]);
  for (int n = 0; n < N; ++n)
    rep.per_stream[static_cast<std::size_t>(n)] =
        stream_sums[static_cast<std::size_t>(n)] / static_cast<double>(rep.token_count);
  if (rep.tokens_l2r > 0)
    rep.loss_l2r = sum_l2r / (static_cast<double>(N) * static_cast<double>(rep.tokens_l2r));
  if (rep.tokens_urp > 0)
    rep.loss_urp = sum_urp / (static_cast<double>(N) * static_cast<double>(rep.tokens_urp));
  rep.mean_log_prior = prior_sum / static_cast<double>(order_count);
  if (total_out) *total_out = total;
  return rep;
}

struct TrainStepLog {
  int step = 0;  // 1-based optimizer step
  LossReport report;
  double lr = 0.0;
  double grad_norm = 0.0;  // pre-clip global norm
};

struct TrainResult {
  std::vector<TrainStepLog> steps;
  std::vector<int> epoch_end_step;  // cumulative step count at each completed epoch
  std::vector<std::string> checkpoint_paths;
  bool hit_max_steps = false;
};

// Adam training loop with linear warmup, global-norm clipping, per-epoch
// checkpoints, and a divergence guard. out_dir may be empty (no files).
// on_step, when set, observes each completed optimizer step.
TrainResult train(Model& model, const Dataset& data, const TrainingConfig& cfg,
                  const std::string& out_dir,
                  const std::function<void(const TrainStepLog&)>& on_step = {});

// Per-epoch token-weighted branch means; epochs where a branch drew no orders
// are omitted from that branch's series.
struct LossSplitSeries {
  std::vector<int> epoch;  // 1-based
  std::vector<double> value;
};
struct LossSplit {
  LossSplitSeries l2r;
  LossSplitSeries urp;
};
LossSplit loss_split(const TrainResult& result);

// CSV loss log (one row per step, with header) and two-column plot-friendly
// branch files <prefix>_l2r.dat / <prefix>_urp.dat.
void write_loss_log(const std::string& path, const TrainResult& result);
void write_loss_split(const std::string& path_prefix, const LossSplit& split);

}  // namespace p3lm
