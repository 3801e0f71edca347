#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "aemu/pipeline.hpp"

namespace aemu {

enum class Activation : std::uint8_t { kSigmoid = 0, kTanh = 1, kRelu = 2 };
enum class DType { kF32, kF64 };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view text);

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Dense feed-forward network. Layer l maps dims[l] -> dims[l+1] with a
/// row-major weight matrix of shape (dims[l+1], dims[l]). Hidden layers use
/// `hidden_activation`; the output layer is linear.
template <typename T>
struct BasicNetwork {
  std::vector<std::size_t> layer_dims;
  std::vector<Matrix<T>> weights;
  std::vector<Vector<T>> biases;
  Activation hidden_activation = Activation::kSigmoid;

  static constexpr DType dtype() { return std::is_same_v<T, float> ? DType::kF32 : DType::kF64; }
  std::size_t n_layers() const noexcept { return weights.size(); }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t parameter_count() const;
  bool all_finite() const;

  template <typename U>
  BasicNetwork<U> cast() const {
    BasicNetwork<U> out;
    out.layer_dims = layer_dims;
    out.hidden_activation = hidden_activation;
    for (const auto& w : weights) out.weights.push_back(w.template cast<U>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<U>());
    return out;
  }

  bool operator==(const BasicNetwork& o) const {
    if (layer_dims != o.layer_dims || hidden_activation != o.hidden_activation) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l] != o.weights[l] || biases[l] != o.biases[l]) return false;
    }
    return true;
  }
};

using Network = BasicNetwork<float>;
using NetworkF64 = BasicNetwork<double>;

/// dL/dtheta, shaped like the network's parameters.
template <typename T>
struct BasicGradientSet {
  std::vector<Matrix<T>> weights;
  std::vector<Vector<T>> biases;

  static BasicGradientSet zeros_like(const BasicNetwork<T>& net);
};

using GradientSet = BasicGradientSet<float>;

/// Default architecture: 34 inputs, two hidden layers of 256, 28 outputs.
std::vector<std::size_t> default_layer_dims();

/// Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), biases zero.
template <typename T>
BasicNetwork<T> init_network(std::span<const std::size_t> layer_dims, Activation activation, std::uint64_t seed);

template <typename T>
Matrix<T> forward(const BasicNetwork<T>& net, const Matrix<T>& inputs);

/// Row-chunked forward on `threads` threads.
template <typename T>
Matrix<T> forward_parallel(const BasicNetwork<T>& net, const Matrix<T>& inputs, std::size_t threads);

/// Scratch buffers reused across backward calls.
template <typename T>
struct BackpropWorkspace {
  std::vector<Matrix<T>> activations;
  std::vector<Matrix<T>> deltas;
};

/// Mean squared error over all rows and outputs, plus its exact gradient,
/// written into `grads` (resized as needed). Returns the loss.
template <typename T>
double backward(const BasicNetwork<T>& net, const Matrix<T>& inputs, const Matrix<T>& targets,
                BackpropWorkspace<T>& workspace, BasicGradientSet<T>& grads);

template <typename T>
struct LossAndGradients {
  double loss = 0.0;
  BasicGradientSet<T> grads;
};

template <typename T>
LossAndGradients<T> backward(const BasicNetwork<T>& net, const Matrix<T>& inputs, const Matrix<T>& targets);

/// Mean squared error of forward(net, inputs) against targets, f64 accumulation.
template <typename T>
double mse(const BasicNetwork<T>& net, const Matrix<T>& inputs, const Matrix<T>& targets);

/// Column-major batch -> row-major matrix, and back.
template <typename T>
Matrix<T> to_matrix(const SampleBatch& batch);
SampleBatch from_matrix(const Matrix<double>& m, const SampleBatch& like_names, Space space);

/// Checkpoint layout, little-endian:
///   "AEMC" | u16 version | u16 n_dims | u32 dims[n_dims] | u8 activation |
///   f32 params (per layer: weights row-major, then biases) |
///   u32 spec_len | spec JSON | u32 CRC32 of all preceding bytes
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  Network net;
  TransformSpec spec;
};

std::string encode_checkpoint(const Network& net, const TransformSpec& spec);
Checkpoint decode_checkpoint(std::string_view bytes);

/// Atomic write (temporary file + rename).
void save_checkpoint(const Network& net, const TransformSpec& spec, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// As above, and throws SchemaHashMismatch if the bound spec does not match `schema`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const VariableSchema& schema);

}  // namespace aemu
