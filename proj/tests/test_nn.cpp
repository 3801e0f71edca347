#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "aemu/error.hpp"
#include "aemu/nn.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace aemu;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an aemu::Error");
  return ErrorCode::kUsage;
}

double act_oracle(double z, Activation a) {
  switch (a) {
    case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::kTanh: return std::tanh(z);
    case Activation::kRelu: return z > 0 ? z : 0.0;
  }
  return 0;
}

// Loop-based forward pass and MSE, independent of the Eigen implementation.
std::vector<double> naive_forward_row(const NetworkF64& net, const std::vector<double>& x) {
  std::vector<double> h = x;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const auto& w = net.weights[l];
    std::vector<double> z(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      double s = net.biases[l][i];
      for (Eigen::Index j = 0; j < w.cols(); ++j) s += w(i, j) * h[static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(i)] = l + 1 < net.n_layers() ? act_oracle(s, net.hidden_activation) : s;
    }
    h = std::move(z);
  }
  return h;
}

double naive_loss(const NetworkF64& net, const Matrix<double>& x, const Matrix<double>& y) {
  double s = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    std::vector<double> row(x.row(r).data(), x.row(r).data() + x.cols());
    const auto out = naive_forward_row(net, row);
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      const double d = out[static_cast<std::size_t>(c)] - y(r, c);
      s += d * d;
    }
  }
  return s / static_cast<double>(y.size());
}

// Bitwise CRC-32 (IEEE, reflected), as an oracle for the checkpoint trailer.
std::uint32_t crc32_oracle(std::string_view bytes) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (unsigned char b : bytes) {
    crc ^= b;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

void put_u32(std::string& s, std::size_t off, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s[off + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

TransformSpec dummy_spec() {
  const auto& s = builtin_schema();
  const Dataset d{test::random_batch(Role::kInput, Space::kRaw, 20, 1),
                  test::random_batch(Role::kOutput, Space::kRaw, 20, 2)};
  return fit_transform_spec(d, s);
}

}  // namespace

TEST_CASE("parameter count of the default network") {
  const auto dims = default_layer_dims();
  CHECK(dims == std::vector<std::size_t>{34, 256, 256, 28});
  const Network net = init_network<float>(dims, Activation::kSigmoid, 1);
  CHECK(net.parameter_count() == 34 * 256 + 256 + 256 * 256 + 256 + 256 * 28 + 28);
  CHECK(net.parameter_count() == 81948);
  CHECK(net.hidden_activation == Activation::kSigmoid);
}

TEST_CASE("initialization: seeded, bounded, zero biases") {
  const std::vector<std::size_t> dims{34, 64, 28};
  const auto a = init_network<float>(dims, Activation::kTanh, 5);
  const auto b = init_network<float>(dims, Activation::kTanh, 5);
  const auto c = init_network<float>(dims, Activation::kTanh, 6);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (std::size_t l = 0; l < a.n_layers(); ++l) {
    const double bound = std::sqrt(1.0 / static_cast<double>(dims[l]));
    CHECK(a.weights[l].rows() == static_cast<Eigen::Index>(dims[l + 1]));
    CHECK(a.weights[l].cols() == static_cast<Eigen::Index>(dims[l]));
    CHECK(a.weights[l].cwiseAbs().maxCoeff() <= bound);
    // Uniform on the full interval: the extremes get close to the bound.
    CHECK(a.weights[l].cwiseAbs().maxCoeff() > 0.95 * bound);
    CHECK(a.biases[l].isZero(0));
  }
  CHECK(code_of([] { init_network<float>(std::vector<std::size_t>{34}, Activation::kSigmoid, 0); }) ==
        ErrorCode::kInvalidDims);
  CHECK(code_of([] { init_network<float>(std::vector<std::size_t>{34, 0, 28}, Activation::kSigmoid, 0); }) ==
        ErrorCode::kInvalidDims);
}

TEST_CASE("forward examples") {
  SUBCASE("sigmoid(0) = 1/2") {
    NetworkF64 net = init_network<double>(std::vector<std::size_t>{1, 1, 1}, Activation::kSigmoid, 0);
    net.weights[0](0, 0) = 0.0;
    net.weights[1](0, 0) = 1.0;
    Matrix<double> x(1, 1);
    x(0, 0) = 3.0;
    CHECK(forward(net, x)(0, 0) == 0.5);
  }
  SUBCASE("zero hidden layers is an affine map") {
    NetworkF64 net = init_network<double>(std::vector<std::size_t>{34, 34}, Activation::kSigmoid, 0);
    net.weights[0].setIdentity();
    const auto x = test::random_matrix<double>(5, 34, 1);
    CHECK(forward(net, x) == x);
    const Network lin = init_network<float>(std::vector<std::size_t>{34, 28}, Activation::kSigmoid, 3);
    CHECK(lin.parameter_count() == 34 * 28 + 28);
  }
  SUBCASE("dimension mismatch") {
    const Network net = init_network<float>(default_layer_dims(), Activation::kSigmoid, 0);
    CHECK(code_of([&] { forward(net, test::random_matrix<float>(2, 33, 0)); }) == ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("batched forward equals per-row evaluation") {
  for (auto act : {Activation::kSigmoid, Activation::kTanh, Activation::kRelu}) {
    const NetworkF64 net = init_network<double>(std::vector<std::size_t>{34, 32, 16, 28}, act, 11);
    const auto x = test::random_matrix<double>(7, 34, 12);
    const auto batched = forward(net, x);
    for (Eigen::Index r = 0; r < 7; ++r) {
      const Matrix<double> single = forward(net, Matrix<double>(x.row(r)));
      CHECK((single.row(0) - batched.row(r)).cwiseAbs().maxCoeff() <= 1e-12);
      std::vector<double> row(x.row(r).data(), x.row(r).data() + 34);
      const auto want = naive_forward_row(net, row);
      for (Eigen::Index c = 0; c < 28; ++c) CHECK(batched(r, c) == doctest::Approx(want[c]).epsilon(1e-12));
    }
    const Network f = net.cast<float>();
    const auto xf = x.cast<float>().eval();
    const auto bf = forward(f, xf);
    for (Eigen::Index r = 0; r < 7; ++r) {
      const Matrix<float> single = forward(f, Matrix<float>(xf.row(r)));
      CHECK((single.row(0) - bf.row(r)).cwiseAbs().maxCoeff() <= 1e-6f);
    }
  }
}

TEST_CASE("forward is pure and parallel forward matches") {
  const Network net = init_network<float>(default_layer_dims(), Activation::kSigmoid, 2);
  const auto x = test::random_matrix<float>(1001, 34, 3);
  const auto a = forward(net, x);
  CHECK(forward(net, x) == a);
  CHECK(forward_parallel(net, x, 1) == a);
  for (std::size_t t : {2, 3, 8}) {
    // GEMM blocking depends on the chunk height, so only closeness is expected across
    // thread counts; a fixed thread count must reproduce itself bit for bit.
    const auto p = forward_parallel(net, x, t);
    CHECK(forward_parallel(net, x, t) == p);
    CHECK((p - a).cwiseAbs().maxCoeff() <= 1e-5f);
  }
}

TEST_CASE("f32 and f64 forward agree on standardized data") {
  const NetworkF64 net = init_network<double>(default_layer_dims(), Activation::kSigmoid, 4);
  const auto x = test::random_matrix<double>(200, 34, 5);
  const auto y64 = forward(net, x);
  const auto y32 = forward(net.cast<float>(), x.cast<float>().eval()).cast<double>().eval();
  const double scale = y64.cwiseAbs().maxCoeff();
  CHECK((y64 - y32).cwiseAbs().maxCoeff() <= 1e-4 * scale);
}

TEST_CASE("backward examples") {
  SUBCASE("loss (0 + 4) / 2 = 2") {
    NetworkF64 net = init_network<double>(std::vector<std::size_t>{2, 2}, Activation::kSigmoid, 0);
    net.weights[0].setIdentity();
    Matrix<double> x(1, 2), y(1, 2);
    x << 1, 2;
    y << 1, 4;
    CHECK(backward(net, x, y).loss == 2.0);
    CHECK(mse(net, x, y) == 2.0);
  }
  SUBCASE("targets = forward output: zero loss and gradients") {
    const NetworkF64 net = init_network<double>(std::vector<std::size_t>{5, 6, 3}, Activation::kTanh, 1);
    const auto x = test::random_matrix<double>(4, 5, 2);
    const auto y = forward(net, x);
    const auto lg = backward(net, x, y);
    CHECK(lg.loss == 0.0);
    for (const auto& g : lg.grads.weights) CHECK(g.isZero(0));
    for (const auto& g : lg.grads.biases) CHECK(g.isZero(0));
  }
  SUBCASE("shape mismatch") {
    const NetworkF64 net = init_network<double>(std::vector<std::size_t>{5, 3}, Activation::kTanh, 1);
    CHECK(code_of([&] { backward(net, test::random_matrix<double>(4, 5, 0), test::random_matrix<double>(4, 2, 0)); }) ==
          ErrorCode::kDimensionMismatch);
  }
}

namespace {

double gradient_check(const NetworkF64& net, const Matrix<double>& x, const Matrix<double>& y) {
  CHECK(backward(net, x, y).loss == doctest::Approx(naive_loss(net, x, y)).epsilon(1e-12));
  return test::max_gradient_error(net, x, y);
}

}  // namespace

TEST_CASE("gradient check on a tiny net") {
  for (auto act : {Activation::kSigmoid, Activation::kTanh}) {
    NetworkF64 net = init_network<double>(std::vector<std::size_t>{3, 4, 2}, act, 7);
    for (auto& b : net.biases) b = Vector<double>::Random(b.size());
    const double worst = gradient_check(net, test::random_matrix<double>(5, 3, 8), test::random_matrix<double>(5, 2, 9));
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("gradient check on random networks") {
  const std::vector<std::vector<std::size_t>> shapes{{3, 4, 2},  {34, 28},        {34, 8, 28},     {5, 7, 7, 3},
                                                     {34, 16, 28}, {34, 32, 32, 28}, {10, 20, 5},    {34, 12, 9, 28},
                                                     {2, 3, 3, 3, 2}, {34, 32, 32, 28}, {6, 1, 4}};
  std::size_t i = 0;
  for (const auto& dims : shapes) {
    const Activation act = i % 2 ? Activation::kTanh : Activation::kSigmoid;
    NetworkF64 net = init_network<double>(dims, act, 100 + i);
    for (auto& b : net.biases) b = 0.3 * Vector<double>::Random(b.size());
    const auto x = test::random_matrix<double>(6, static_cast<Eigen::Index>(dims.front()), 200 + i);
    const auto y = test::random_matrix<double>(6, static_cast<Eigen::Index>(dims.back()), 300 + i);
    const double worst = gradient_check(net, x, y);
    INFO("dims index " << i);
    CHECK(worst <= 1e-6);
    ++i;
  }
}

TEST_CASE("matrix conversions") {
  const SampleBatch b = test::random_batch(Role::kOutput, Space::kStandardized, 9, 3);
  const auto m = to_matrix<double>(b);
  CHECK(m.rows() == 9);
  CHECK(m.cols() == 28);
  CHECK(m(4, 7) == b.columns[7][4]);
  const SampleBatch back = from_matrix(m, b, Space::kStandardized);
  CHECK(back == b);
}

TEST_CASE("checkpoint round trip is bit-identical") {
  test::TempDir dir("ckpt");
  const Network net = init_network<float>(default_layer_dims(), Activation::kTanh, 9);
  const TransformSpec spec = dummy_spec();
  save_checkpoint(net, spec, dir / "m.ckpt");
  const Checkpoint ck = load_checkpoint(dir / "m.ckpt", builtin_schema());
  CHECK(ck.net == net);
  CHECK(ck.spec == spec);
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    CHECK(std::memcmp(ck.net.weights[l].data(), net.weights[l].data(), net.weights[l].size() * 4) == 0);
  }
}

TEST_CASE("checkpoint layout and CRC") {
  const Network net = init_network<float>(std::vector<std::size_t>{34, 3, 28}, Activation::kRelu, 1);
  const std::string bytes = encode_checkpoint(net, dummy_spec());
  CHECK(bytes.substr(0, 4) == "AEMC");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 3);
  CHECK(static_cast<unsigned char>(bytes[6 + 2 + 12]) == 2);  // activation tag
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= std::uint32_t(static_cast<unsigned char>(bytes[bytes.size() - 4 + i])) << (8 * i);
  CHECK(stored == crc32_oracle(std::string_view(bytes).substr(0, bytes.size() - 4)));
}

TEST_CASE("corrupt, truncated and mismatched checkpoints") {
  test::TempDir dir("ckbad");
  const Network net = init_network<float>(default_layer_dims(), Activation::kSigmoid, 1);
  const TransformSpec spec = dummy_spec();
  const std::string bytes = encode_checkpoint(net, spec);

  CHECK(code_of([&] { decode_checkpoint(bytes.substr(0, bytes.size() / 2)); }) == ErrorCode::kCorruptCheckpoint);
  CHECK(code_of([&] { decode_checkpoint(bytes.substr(0, bytes.size() - 1)); }) == ErrorCode::kCorruptCheckpoint);
  CHECK(code_of([&] { decode_checkpoint(""); }) == ErrorCode::kCorruptCheckpoint);
  std::string flipped = bytes;
  flipped[1000] ^= 0x10;
  CHECK(code_of([&] { decode_checkpoint(flipped); }) == ErrorCode::kCorruptCheckpoint);

  std::string v2 = bytes;
  v2[4] = 2;
  put_u32(v2, v2.size() - 4, crc32_oracle(std::string_view(v2).substr(0, v2.size() - 4)));
  CHECK(code_of([&] { decode_checkpoint(v2); }) == ErrorCode::kVersionMismatch);

  TransformSpec other = spec;
  other.schema_hash ^= 0xFF;
  save_checkpoint(net, other, dir / "other.ckpt");
  CHECK_NOTHROW(load_checkpoint(dir / "other.ckpt"));
  CHECK(code_of([&] { load_checkpoint(dir / "other.ckpt", builtin_schema()); }) == ErrorCode::kSchemaHashMismatch);
  CHECK(code_of([&] { load_checkpoint(dir / "missing.ckpt"); }) == ErrorCode::kIo);

  Network bad = net;
  bad.weights[0](0, 0) = NAN;
  CHECK(code_of([&] { encode_checkpoint(bad, spec); }) == ErrorCode::kNumericalFailure);
}

TEST_CASE("activation names") {
  CHECK(parse_activation("sigmoid") == Activation::kSigmoid);
  CHECK(parse_activation("tanh") == Activation::kTanh);
  CHECK(parse_activation("relu") == Activation::kRelu);
  CHECK(to_string(Activation::kRelu) == "relu");
  CHECK(code_of([] { parse_activation("gelu"); }) == ErrorCode::kUsage);
}
