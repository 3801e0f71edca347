#include "aemu/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "aemu/error.hpp"

namespace aemu {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kInvalidConfig, "learning_rate must be > 0");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw Error(ErrorCode::kInvalidConfig, "weight_decay must be >= 0");
  }
  if (batch_size < 1) throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
  if (patience < 1) throw Error(ErrorCode::kInvalidConfig, "patience must be >= 1");
  if (max_epochs < 1) throw Error(ErrorCode::kInvalidConfig, "max_epochs must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "beta1 and beta2 must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kInvalidConfig, "epsilon must be > 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"weight_decay", weight_decay}, {"batch_size", batch_size},
          {"patience", patience},           {"max_epochs", max_epochs},     {"beta1", beta1},
          {"beta2", beta2},                 {"epsilon", epsilon},           {"shuffle_seed", shuffle_seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patience = j.value("patience", c.patience);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.shuffle_seed = j.value("shuffle_seed", c.shuffle_seed);
  return c;
}

template <typename T>
BasicAdamState<T> BasicAdamState<T>::zeros_like(const BasicNetwork<T>& net) {
  return {BasicGradientSet<T>::zeros_like(net), BasicGradientSet<T>::zeros_like(net), 0};
}

namespace {

template <typename T, typename Param, typename Grad>
void update(Param& theta, const Grad& g, Param& m, Param& v, const TrainConfig& c, double bias1, double bias2) {
  const T b1 = static_cast<T>(c.beta1);
  const T b2 = static_cast<T>(c.beta2);
  const T lr = static_cast<T>(c.learning_rate);
  const T eps = static_cast<T>(c.epsilon);
  const T c1 = static_cast<T>(1.0 / bias1);
  const T c2 = static_cast<T>(1.0 / bias2);
  const T decay = static_cast<T>(c.learning_rate * c.weight_decay);
  auto th = theta.array();
  auto ma = m.array();
  auto va = v.array();
  ma = b1 * ma + (T(1) - b1) * g.array();
  va = b2 * va + (T(1) - b2) * g.array().square();
  th -= lr * (ma * c1) / ((va * c2).sqrt() + eps);
  if (decay != T(0)) th -= decay * th;
}

}  // namespace

template <typename T>
void adam_step(BasicNetwork<T>& net, const BasicGradientSet<T>& grads, BasicAdamState<T>& state,
               const TrainConfig& config) {
  const std::size_t L = net.n_layers();
  if (grads.weights.size() != L || grads.biases.size() != L || state.first_moment.weights.size() != L ||
      state.second_moment.weights.size() != L) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient or optimizer state does not match the network");
  }
  for (std::size_t l = 0; l < L; ++l) {
    if (grads.weights[l].rows() != net.weights[l].rows() || grads.weights[l].cols() != net.weights[l].cols() ||
        grads.biases[l].size() != net.biases[l].size()) {
      throw Error(ErrorCode::kDimensionMismatch, "gradient shape mismatch at layer " + std::to_string(l));
    }
    if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite()) {
      throw Error(ErrorCode::kNonFiniteGradient, "non-finite gradient in layer " + std::to_string(l),
                  std::to_string(l));
    }
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t l = 0; l < L; ++l) {
    update<T>(net.weights[l], grads.weights[l], state.first_moment.weights[l], state.second_moment.weights[l], config,
              bias1, bias2);
    update<T>(net.biases[l], grads.biases[l], state.first_moment.biases[l], state.second_moment.biases[l], config,
              bias1, bias2);
  }
}

template struct BasicAdamState<float>;
template struct BasicAdamState<double>;
template void adam_step<float>(Network&, const GradientSet&, AdamState&, const TrainConfig&);
template void adam_step<double>(NetworkF64&, const BasicGradientSet<double>&, BasicAdamState<double>&,
                                const TrainConfig&);

namespace {

void require_finite(double v, std::string_view what, std::size_t epoch) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNumericalFailure,
                std::string(what) + " became non-finite at epoch " + std::to_string(epoch), std::to_string(epoch));
  }
}

void check_data(const Network& net, const TrainingData& d, std::string_view which) {
  if (d.n_rows() == 0) throw Error(ErrorCode::kEmptyDataset, std::string(which) + " set is empty");
  if (static_cast<std::size_t>(d.inputs.cols()) != net.input_dim() ||
      static_cast<std::size_t>(d.targets.cols()) != net.output_dim() || d.targets.rows() != d.inputs.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(which) + " set shape does not match the network");
  }
}

}  // namespace

EpochShuffler::EpochShuffler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

const std::vector<std::size_t>& EpochShuffler::next() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  return order_;
}

TrainResult train(Network net, const TrainingData& train_data, const TrainingData& val_data,
                  const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  check_data(net, train_data, "training");
  if (!hooks.validation_loss) check_data(net, val_data, "validation");

  auto validate = [&](const Network& n, std::size_t epoch) {
    const double v = hooks.validation_loss ? hooks.validation_loss(n, epoch)
                                           : mse(n, val_data.inputs, val_data.targets);
    require_finite(v, "validation loss", epoch);
    return v;
  };

  TrainResult result;
  EpochRecord initial{0, mse(net, train_data.inputs, train_data.targets), validate(net, 0)};
  require_finite(initial.train_mse, "training loss", 0);
  result.history.push_back(initial);
  if (hooks.on_epoch) hooks.on_epoch(initial);
  // Epoch 0 is recorded for reference only; the first trained epoch always becomes the best.
  result.best_net = net;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  result.best_epoch = 0;

  const std::size_t n = train_data.n_rows();
  const std::size_t batch = std::min(config.batch_size, n);
  EpochShuffler shuffler(n, config.shuffle_seed);

  AdamState state = AdamState::zeros_like(net);
  BackpropWorkspace<float> ws;
  GradientSet grads = GradientSet::zeros_like(net);
  Matrix<float> xb(static_cast<Eigen::Index>(batch), train_data.inputs.cols());
  Matrix<float> yb(static_cast<Eigen::Index>(batch), train_data.targets.cols());

  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto& order = shuffler.next();
    double weighted_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t rows = std::min(batch, n - start);  // last short batch kept
      xb.resize(static_cast<Eigen::Index>(rows), xb.cols());
      yb.resize(static_cast<Eigen::Index>(rows), yb.cols());
      for (std::size_t i = 0; i < rows; ++i) {
        const auto src = static_cast<Eigen::Index>(order[start + i]);
        xb.row(static_cast<Eigen::Index>(i)) = train_data.inputs.row(src);
        yb.row(static_cast<Eigen::Index>(i)) = train_data.targets.row(src);
      }
      const double loss = backward(net, xb, yb, ws, grads);
      require_finite(loss, "training loss", epoch);
      adam_step(net, grads, state, config);
      weighted_loss += loss * static_cast<double>(rows);
    }
    EpochRecord rec{epoch, weighted_loss / static_cast<double>(n), validate(net, epoch)};
    result.history.push_back(rec);
    result.epochs_run = epoch;
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (rec.val_mse < result.best_val_mse) {
      result.best_val_mse = rec.val_mse;
      result.best_epoch = epoch;
      result.best_net = net;
      stale = 0;
      if (hooks.on_improvement) hooks.on_improvement(net, rec);
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

TrainingData prepare_training_data(const Dataset& raw, const TransformSpec& spec, const VariableSchema& schema) {
  const SampleBatch targets = compute_tendencies(raw.inputs, raw.outputs, schema);
  return {to_matrix<float>(apply_pipeline(raw.inputs, spec, schema)),
          to_matrix<float>(apply_pipeline(targets, spec, schema))};
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_mse,val_mse\n";
  char buf[64];
  for (const auto& h : history) {
    out += std::to_string(h.epoch);
    out += ',';
    out.append(buf, std::to_chars(buf, buf + sizeof(buf), h.train_mse).ptr);
    out += ',';
    out.append(buf, std::to_chars(buf, buf + sizeof(buf), h.val_mse).ptr);
    out += '\n';
  }
  return out;
}

}  // namespace aemu
