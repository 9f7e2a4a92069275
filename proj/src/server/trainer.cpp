#include "splitstream/trainer.hpp"

#include <numeric>

#include "splitstream/errors.hpp"

namespace splitstream {

namespace {

constexpr std::uint64_t kShuffleStream = 0x53485546;  // "SHUF"

Tensor label_tensor(float label) { return Tensor({1}, std::vector<float>{label}); }

}  // namespace

TrainState::TrainState(Network net, TrainOptions opts)
    : network(std::move(net)), options(opts), shuffle_rng(derive_seed(opts.seed, kShuffleStream)) {
  if (options.batch_size == 0) throw ConfigError("batch size must be positive");
  if (options.learning_rate < 0) throw ConfigError("learning rate must be >= 0");
}

void train(TrainState& state, std::span<const Example> data, std::size_t first_trainable,
           const EpochHook& hook,
           std::span<const std::pair<std::uint32_t, std::uint64_t>> provenance) {
  if (data.empty()) throw DataError("training set is empty");
  const TrainOptions& opt = state.options;
  std::vector<std::size_t> order(data.size());
  std::vector<Example> batch;
  while (state.epoch < opt.epochs) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), state.shuffle_rng);

    double loss_sum = 0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(start + opt.batch_size, order.size());
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      BackpropResult<float> result;
      try {
        result = backprop(state.network, std::span<const Example>(batch), opt.loss, first_trainable);
      } catch (const DataError& e) {
        std::string where;
        for (std::size_t i = start; i < end && !provenance.empty(); ++i) {
          const auto [c, s] = provenance[order[i]];
          where += " (" + std::to_string(c) + "," + std::to_string(s) + ")";
        }
        throw DataError(std::string(e.what()) + (where.empty() ? "" : "; batch records:" + where));
      }
      loss_sum += result.loss * static_cast<double>(end - start);
      if (opt.task == TaskKind::kClassification) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
          hits += (result.outputs[i][0] >= 0.5f ? 1.f : 0.f) == batch[i].target[0];
        }
      }
      sgd_step(state.network, result.grads, opt.learning_rate, first_trainable);
    }
    EpochMetrics m;
    m.epoch = ++state.epoch;
    m.loss = loss_sum / static_cast<double>(data.size());
    if (opt.task == TaskKind::kClassification) {
      m.accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(data.size());
    }
    if (hook) hook(state.network, m);
    state.log.push_back(m);
  }
}

std::vector<Example> to_examples(const AssembledDataset& data) {
  std::vector<Example> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back({data.features[i], label_tensor(data.labels[i])});
  }
  return out;
}

std::vector<Example> to_examples(std::span<const Sample> samples) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.features, label_tensor(s.label)});
  return out;
}

void train_server_model(TrainState& state, const AssembledDataset& data, const EpochHook& hook) {
  if (data.size() == 0) throw DataError("assembled dataset is empty");
  if (data.features.front().dims() != state.network.input_shape()) {
    throw ConfigError("assembled features have shape " + to_string(data.features.front().dims()) +
                      ", server part expects " + to_string(state.network.input_shape()));
  }
  const auto examples = to_examples(data);
  train(state, examples, 0, hook, data.provenance);
}

Evaluation evaluate(const Network& client_part, const Network& server_part,
                    std::span<const Sample> samples, LossKind loss, TaskKind task) {
  if (samples.empty()) throw DataError("evaluation set is empty");
  if (client_part.output_shape() != server_part.input_shape()) {
    throw ConfigError("client output " + to_string(client_part.output_shape()) +
                      " does not feed server input " + to_string(server_part.input_shape()));
  }
  Evaluation ev;
  for (const auto& s : samples) {
    if (s.features.dims() != client_part.input_shape()) {
      throw ConfigError("eval sample " + std::to_string(s.sample_id) + " has shape " +
                        to_string(s.features.dims()));
    }
    const Tensor yhat = model_forward(server_part, model_forward(client_part, s.features));
    const Tensor y = label_tensor(s.label);
    ev.predictions.push_back(yhat[0]);
    ev.labels.push_back(s.label);
    ev.per_sample_losses.push_back(loss_forward(y, yhat, loss));
  }
  ev.summary["loss"] = std::accumulate(ev.per_sample_losses.begin(), ev.per_sample_losses.end(), 0.0) /
                       static_cast<double>(samples.size());
  if (task == TaskKind::kClassification) {
    ev.summary["accuracy"] = classification_accuracy(ev.predictions, ev.labels);
  } else {
    // Predictions at or below -1 have no log; clamp just above for the report.
    std::vector<float> clamped(ev.predictions);
    for (auto& p : clamped) p = std::max(p, -1.f + 1e-6f);
    const auto m = regression_metrics(ev.labels, clamped);
    ev.summary["msle"] = m.msle;
    ev.summary["rmsle"] = m.rmsle;
    ev.summary["smape"] = m.smape;
  }
  return ev;
}

}  // namespace splitstream
