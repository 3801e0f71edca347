#include "aemu/nn.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <zlib.h>

#include "aemu/dataset_io.hpp"
#include "aemu/error.hpp"
#include "aemu/parallel.hpp"
#include "byte_io.hpp"

namespace aemu {

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

Activation parse_activation(std::string_view text) {
  if (text == "sigmoid") return Activation::kSigmoid;
  if (text == "tanh") return Activation::kTanh;
  if (text == "relu") return Activation::kRelu;
  throw Error(ErrorCode::kUsage, "unknown activation '" + std::string(text) + "' (expected sigmoid|tanh|relu)");
}

std::vector<std::size_t> default_layer_dims() { return {34, 256, 256, 28}; }

template <typename T>
std::size_t BasicNetwork<T>::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

template <typename T>
bool BasicNetwork<T>::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

template <typename T>
BasicGradientSet<T> BasicGradientSet<T>::zeros_like(const BasicNetwork<T>& net) {
  BasicGradientSet<T> g;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    g.weights.push_back(Matrix<T>::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Vector<T>::Zero(net.biases[l].size()));
  }
  return g;
}

template <typename T>
BasicNetwork<T> init_network(std::span<const std::size_t> layer_dims, Activation activation, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw Error(ErrorCode::kInvalidDims, "a network needs at least an input and output dim");
  for (auto d : layer_dims) {
    if (d == 0) throw Error(ErrorCode::kInvalidDims, "layer dims must be >= 1");
  }
  BasicNetwork<T> net;
  net.layer_dims.assign(layer_dims.begin(), layer_dims.end());
  net.hidden_activation = activation;
  std::mt19937_64 gen(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const auto fan_in = layer_dims[l];
    const auto fan_out = layer_dims[l + 1];
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Matrix<T> w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      // 53-bit uniform in [0, 1), independent of the standard library's distributions.
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      w.data()[i] = static_cast<T>((2.0 * u - 1.0) * bound);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vector<T>::Zero(fan_out));
  }
  return net;
}

namespace {

template <typename T>
void activate(Matrix<T>& z, Activation act) {
  auto a = z.array();
  switch (act) {
    case Activation::kSigmoid: a = T(1) / (T(1) + (-a).exp()); break;
    case Activation::kTanh: a = a.tanh(); break;
    case Activation::kRelu: a = a.max(T(0)); break;
  }
}

// Multiplies `delta` by the activation derivative, expressed through the activation output.
template <typename T>
void scale_by_derivative(Matrix<T>& delta, const Matrix<T>& out, Activation act) {
  auto d = delta.array();
  auto a = out.array();
  switch (act) {
    case Activation::kSigmoid: d *= a * (T(1) - a); break;
    case Activation::kTanh: d *= T(1) - a.square(); break;
    case Activation::kRelu: d = (a > T(0)).select(d, T(0)); break;
  }
}

template <typename T>
void affine(const Matrix<T>& in, const Matrix<T>& w, const Vector<T>& b, Matrix<T>& out) {
  out.resize(in.rows(), w.rows());
  out.noalias() = in * w.transpose();
  out.rowwise() += b.transpose();
}

template <typename T>
void check_input(const BasicNetwork<T>& net, const Matrix<T>& inputs) {
  if (net.n_layers() == 0) throw Error(ErrorCode::kInvalidDims, "network has no layers");
  if (static_cast<std::size_t>(inputs.cols()) != net.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "input width " + std::to_string(inputs.cols()) +
                                                   " does not match network input dim " +
                                                   std::to_string(net.input_dim()));
  }
}

}  // namespace

template <typename T>
Matrix<T> forward(const BasicNetwork<T>& net, const Matrix<T>& inputs) {
  check_input(net, inputs);
  Matrix<T> cur;
  Matrix<T> next;
  const Matrix<T>* in = &inputs;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    affine(*in, net.weights[l], net.biases[l], next);
    if (l + 1 < net.n_layers()) activate(next, net.hidden_activation);
    std::swap(cur, next);
    in = &cur;
  }
  return cur;
}

template <typename T>
Matrix<T> forward_parallel(const BasicNetwork<T>& net, const Matrix<T>& inputs, std::size_t threads) {
  check_input(net, inputs);
  Matrix<T> out(inputs.rows(), static_cast<Eigen::Index>(net.output_dim()));
  parallel_for(static_cast<std::size_t>(inputs.rows()), threads, [&](std::size_t b, std::size_t e) {
    if (b == e) return;
    const auto rows = static_cast<Eigen::Index>(e - b);
    Matrix<T> chunk = inputs.middleRows(static_cast<Eigen::Index>(b), rows);
    out.middleRows(static_cast<Eigen::Index>(b), rows) = forward(net, chunk);
  });
  return out;
}

template <typename T>
double backward(const BasicNetwork<T>& net, const Matrix<T>& inputs, const Matrix<T>& targets,
                BackpropWorkspace<T>& ws, BasicGradientSet<T>& grads) {
  check_input(net, inputs);
  if (targets.rows() != inputs.rows() || static_cast<std::size_t>(targets.cols()) != net.output_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "targets shape does not match network output");
  }
  if (inputs.rows() == 0) throw Error(ErrorCode::kEmptyDataset, "backward on an empty batch");
  const std::size_t L = net.n_layers();
  ws.activations.resize(L);
  ws.deltas.resize(L);
  if (grads.weights.size() != L) grads = BasicGradientSet<T>::zeros_like(net);

  // activations[l] is the output of layer l.
  for (std::size_t l = 0; l < L; ++l) {
    const Matrix<T>& in = l == 0 ? inputs : ws.activations[l - 1];
    affine(in, net.weights[l], net.biases[l], ws.activations[l]);
    if (l + 1 < L) activate(ws.activations[l], net.hidden_activation);
  }

  Matrix<T>& delta_out = ws.deltas[L - 1];
  delta_out = ws.activations[L - 1] - targets;
  double sum_sq = 0.0;
  const T* d = delta_out.data();
  for (Eigen::Index i = 0; i < delta_out.size(); ++i) sum_sq += static_cast<double>(d[i]) * static_cast<double>(d[i]);
  const double count = static_cast<double>(delta_out.size());
  delta_out *= static_cast<T>(2.0 / count);

  for (std::size_t l = L; l-- > 0;) {
    const Matrix<T>& in = l == 0 ? inputs : ws.activations[l - 1];
    grads.weights[l].noalias() = ws.deltas[l].transpose() * in;
    grads.biases[l] = ws.deltas[l].colwise().sum().transpose();
    if (l > 0) {
      ws.deltas[l - 1].resize(ws.deltas[l].rows(), net.weights[l].cols());
      ws.deltas[l - 1].noalias() = ws.deltas[l] * net.weights[l];
      scale_by_derivative(ws.deltas[l - 1], ws.activations[l - 1], net.hidden_activation);
    }
  }
  return sum_sq / count;
}

template <typename T>
LossAndGradients<T> backward(const BasicNetwork<T>& net, const Matrix<T>& inputs, const Matrix<T>& targets) {
  BackpropWorkspace<T> ws;
  LossAndGradients<T> out;
  out.loss = backward(net, inputs, targets, ws, out.grads);
  return out;
}

template <typename T>
double mse(const BasicNetwork<T>& net, const Matrix<T>& inputs, const Matrix<T>& targets) {
  if (targets.rows() != inputs.rows() || static_cast<std::size_t>(targets.cols()) != net.output_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "targets shape does not match network output");
  }
  if (inputs.rows() == 0) throw Error(ErrorCode::kEmptyDataset, "mse on an empty batch");
  // Chunked so peak memory stays bounded on large evaluation sets.
  constexpr Eigen::Index kChunk = 16384;
  double sum_sq = 0.0;
  for (Eigen::Index b = 0; b < inputs.rows(); b += kChunk) {
    const Eigen::Index n = std::min(kChunk, inputs.rows() - b);
    const Matrix<T> pred = forward(net, Matrix<T>(inputs.middleRows(b, n)));
    const auto tgt = targets.middleRows(b, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < pred.cols(); ++c) {
        const double e = static_cast<double>(pred(r, c)) - static_cast<double>(tgt(r, c));
        sum_sq += e * e;
      }
    }
  }
  return sum_sq / static_cast<double>(targets.size());
}

template <typename T>
Matrix<T> to_matrix(const SampleBatch& batch) {
  Matrix<T> m(static_cast<Eigen::Index>(batch.n_rows()), static_cast<Eigen::Index>(batch.n_cols()));
  for (std::size_t c = 0; c < batch.n_cols(); ++c) {
    for (std::size_t r = 0; r < batch.n_rows(); ++r) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<T>(batch.columns[c][r]);
    }
  }
  return m;
}

SampleBatch from_matrix(const Matrix<double>& m, const SampleBatch& like, Space space) {
  if (static_cast<std::size_t>(m.cols()) != like.names.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "matrix width does not match column names");
  }
  SampleBatch out;
  out.role = like.role;
  out.space = space;
  out.names = like.names;
  out.columns.assign(like.names.size(), std::vector<double>(static_cast<std::size_t>(m.rows())));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.columns[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] = m(r, c);
  }
  return out;
}

// ---- checkpoint ----------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'A', 'E', 'M', 'C'};

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string encode_checkpoint(const Network& net, const TransformSpec& spec) {
  if (!net.all_finite()) throw Error(ErrorCode::kNumericalFailure, "refusing to checkpoint non-finite parameters");
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kCheckpointMagic, 4));
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(net.layer_dims.size()));
  for (auto d : net.layer_dims) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(net.hidden_activation));
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const auto& wm = net.weights[l];
    for (Eigen::Index i = 0; i < wm.size(); ++i) w.put<float>(wm.data()[i]);
    const auto& b = net.biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) w.put<float>(b[i]);
  }
  const std::string json = spec.to_json().dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(json.size()));
  w.put_bytes(json);
  w.put<std::uint32_t>(crc32_of(w.buffer()));
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 + 2 + 4 || bytes.substr(0, 4) != std::string_view(kCheckpointMagic, 4)) {
    throw Error(ErrorCode::kCorruptCheckpoint, "not an AEMC checkpoint");
  }
  const auto body = bytes.substr(0, bytes.size() - 4);
  detail::ByteReader tail(bytes.substr(bytes.size() - 4), ErrorCode::kCorruptCheckpoint);
  if (tail.get<std::uint32_t>() != crc32_of(body)) {
    throw Error(ErrorCode::kCorruptCheckpoint, "checkpoint CRC32 mismatch (truncated or corrupted file)");
  }
  detail::ByteReader rd(body, ErrorCode::kCorruptCheckpoint);
  rd.get_bytes(4);
  const auto version = rd.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kVersionMismatch, "checkpoint version " + std::to_string(version) + " unsupported");
  }
  Checkpoint ck;
  const auto n_dims = rd.get<std::uint16_t>();
  if (n_dims < 2) throw Error(ErrorCode::kCorruptCheckpoint, "checkpoint has fewer than two layer dims");
  for (std::uint16_t i = 0; i < n_dims; ++i) ck.net.layer_dims.push_back(rd.get<std::uint32_t>());
  const auto act = rd.get<std::uint8_t>();
  if (act > static_cast<std::uint8_t>(Activation::kRelu)) {
    throw Error(ErrorCode::kCorruptCheckpoint, "unknown activation tag " + std::to_string(act));
  }
  ck.net.hidden_activation = static_cast<Activation>(act);
  for (std::size_t l = 0; l + 1 < ck.net.layer_dims.size(); ++l) {
    const auto rows = static_cast<Eigen::Index>(ck.net.layer_dims[l + 1]);
    const auto cols = static_cast<Eigen::Index>(ck.net.layer_dims[l]);
    if (rd.remaining() < static_cast<std::size_t>(rows * cols + rows) * 4) {
      throw Error(ErrorCode::kCorruptCheckpoint, "parameter blob shorter than declared dims");
    }
    Matrix<float> w(rows, cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rd.get<float>();
    Vector<float> b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) b[i] = rd.get<float>();
    ck.net.weights.push_back(std::move(w));
    ck.net.biases.push_back(std::move(b));
  }
  const auto json_len = rd.get<std::uint32_t>();
  const auto json = rd.get_bytes(json_len);
  if (rd.remaining() != 0) throw Error(ErrorCode::kCorruptCheckpoint, "trailing bytes after transform spec");
  try {
    ck.spec = TransformSpec::from_json(nlohmann::json::parse(json));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptCheckpoint, std::string("embedded transform spec is not JSON: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const Network& net, const TransformSpec& spec, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(net, spec));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const VariableSchema& schema) {
  Checkpoint ck = load_checkpoint(path);
  check_spec_matches(ck.spec, schema);
  if (ck.net.input_dim() != schema.count_inputs() || ck.net.output_dim() != schema.count_outputs()) {
    throw Error(ErrorCode::kDimensionMismatch, "checkpoint network dims do not match the schema");
  }
  return ck;
}

#define AEMU_INSTANTIATE(T)                                                                                      \
  template struct BasicNetwork<T>;                                                                               \
  template struct BasicGradientSet<T>;                                                                           \
  template BasicNetwork<T> init_network<T>(std::span<const std::size_t>, Activation, std::uint64_t);             \
  template Matrix<T> forward<T>(const BasicNetwork<T>&, const Matrix<T>&);                                       \
  template Matrix<T> forward_parallel<T>(const BasicNetwork<T>&, const Matrix<T>&, std::size_t);                 \
  template double backward<T>(const BasicNetwork<T>&, const Matrix<T>&, const Matrix<T>&, BackpropWorkspace<T>&, \
                              BasicGradientSet<T>&);                                                             \
  template LossAndGradients<T> backward<T>(const BasicNetwork<T>&, const Matrix<T>&, const Matrix<T>&);          \
  template double mse<T>(const BasicNetwork<T>&, const Matrix<T>&, const Matrix<T>&);                            \
  template Matrix<T> to_matrix<T>(const SampleBatch&);

AEMU_INSTANTIATE(float)
AEMU_INSTANTIATE(double)

#undef AEMU_INSTANTIATE

}  // namespace aemu
