#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "aemu/error.hpp"
#include "aemu/synthgen.hpp"

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

SurrogateConfig small(std::size_t n, std::uint64_t seed = 42) {
  SurrogateConfig c;
  c.n_samples = n;
  c.seed = seed;
  return c;
}

// Sum of each species' mass columns per row, from a batch of either role.
std::map<Species, std::vector<double>> species_totals(const SampleBatch& b) {
  const auto& s = builtin_schema();
  std::map<Species, std::vector<double>> out;
  for (std::size_t c = 0; c < b.n_cols(); ++c) {
    const auto& def = s.lookup(b.names[c]);
    if (def.kind != VariableKind::kSpeciesMass || def.species == Species::kSS) continue;
    auto& tot = out[*def.species];
    tot.resize(b.n_rows(), 0.0);
    for (std::size_t r = 0; r < b.n_rows(); ++r) tot[r] += b.columns[c][r];
  }
  return out;
}

}  // namespace

TEST_CASE("generation is deterministic and independent of threads") {
  const auto a = generate_dataset(small(3000));
  const auto b = generate_dataset(small(3000));
  CHECK(a.inputs == b.inputs);
  CHECK(a.outputs == b.outputs);
  const auto c = generate_dataset(small(3000), builtin_schema(), 4);
  CHECK(a.inputs == c.inputs);
  CHECK(a.outputs == c.outputs);
  const auto d = generate_dataset(small(3000, 43));
  CHECK_FALSE(a.inputs == d.inputs);
}

TEST_CASE("rows depend only on seed and row index") {
  const auto a = generate_inputs(small(100));
  const auto b = generate_inputs(small(250));
  CHECK(a == b.slice(0, 100));
}

TEST_CASE("n_samples = 0 is an empty request") {
  CHECK(code_of([] { generate_inputs(small(0)); }) == ErrorCode::kEmptyRequest);
  SurrogateConfig bad = small(5);
  bad.zero_inflation = 1.5;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kInvalidConfig);
  bad = small(5);
  bad.strengths.coagulation = -1;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("input ranges") {
  const auto in = generate_inputs(small(20000));
  auto range = [&](const char* name) {
    const auto& c = in.column(name);
    return std::pair{*std::min_element(c.begin(), c.end()), *std::max_element(c.begin(), c.end())};
  };
  auto [tlo, thi] = range("Temperature");
  CHECK(tlo >= 180.0);
  CHECK(thi <= 310.0);
  auto [plo, phi] = range("Pressure");
  CHECK(plo >= 10.0);
  CHECK(phi <= 105000.0);
  auto [hlo, hhi] = range("Rel. Humidity");
  CHECK(hlo >= 0.0);
  CHECK(hhi <= 1.0);
  const auto& s = builtin_schema();
  for (std::size_t c = 0; c < s.count_inputs(); ++c) {
    const auto kind = s.input(c).kind;
    if (kind != VariableKind::kSpeciesMass && kind != VariableKind::kModeConcentration) continue;
    const auto& col = in.columns[c];
    const double zeros = static_cast<double>(std::count(col.begin(), col.end(), 0.0)) / col.size();
    CHECK(zeros > 0.3);
    CHECK(zeros < 0.4);
    double lo = INFINITY, hi = 0;
    for (double v : col) {
      CHECK(v >= 0.0);
      if (v > 0) lo = std::min(lo, v), hi = std::max(hi, v);
    }
    CHECK(hi / lo >= 1e6);
  }
}

TEST_CASE("species mass is conserved except the H2SO4/SO4 pair, which is conserved jointly") {
  const auto d = generate_dataset(small(50000));
  auto before = species_totals(d.inputs);
  auto after = species_totals(d.outputs);
  for (auto sp : {Species::kBC, Species::kOC, Species::kDU}) {
    for (std::size_t r = 0; r < d.inputs.n_rows(); ++r) {
      const double b = before[sp][r], a = after[sp][r];
      REQUIRE(std::fabs(a - b) <= 1e-12 * std::max(std::fabs(b), 1e-300));
    }
  }
  std::size_t moved = 0;
  for (std::size_t r = 0; r < d.inputs.n_rows(); ++r) {
    const double b = before[Species::kSO4][r] + before[Species::kH2SO4][r];
    const double a = after[Species::kSO4][r] + after[Species::kH2SO4][r];
    REQUIRE(std::fabs(a - b) <= 1e-12 * std::max(std::fabs(b), 1e-300));
    moved += before[Species::kSO4][r] != after[Species::kSO4][r];
  }
  CHECK(moved > d.inputs.n_rows() / 2);
}

TEST_CASE("all-zero masses and numbers give zero mass tendencies") {
  const auto& s = builtin_schema();
  auto in = generate_inputs(small(500));
  for (std::size_t c = 0; c < s.count_inputs(); ++c) {
    const auto kind = s.input(c).kind;
    if (kind == VariableKind::kSpeciesMass || kind == VariableKind::kModeConcentration) {
      std::fill(in.columns[c].begin(), in.columns[c].end(), 0.0);
    }
  }
  const auto t = compute_tendencies(in, reference_step(in, small(500)), s);
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    for (double v : t.columns[c]) REQUIRE(v == 0.0);
  }
}

TEST_CASE("nucleation is off below the humidity threshold") {
  const auto& s = builtin_schema();
  auto in = generate_inputs(small(5000));
  // Empty ks mode so scavenging cannot move ns mass either.
  std::fill(in.column("ks concentration").begin(), in.column("ks concentration").end(), 0.0);
  for (auto& v : in.column("Rel. Humidity")) v *= kNucleationHumidityThreshold;
  const auto t = compute_tendencies(in, reference_step(in, small(5000)), s);
  for (double v : t.column("SO4 ns mass")) REQUIRE(v == 0.0);

  // Above the threshold with gas present, ns mass grows.
  for (auto& v : in.column("Rel. Humidity")) v = 0.95;
  for (auto& v : in.column("H2SO4 mass")) v = 1000.0;
  for (auto& v : in.column("H2SO4 prod. rate")) v = 1e4;
  const auto t2 = compute_tendencies(in, reference_step(in, small(5000)), s);
  for (double v : t2.column("SO4 ns mass")) REQUIRE(v > 0.0);
}

TEST_CASE("invalid inputs are rejected") {
  auto in = generate_inputs(small(10));
  in.column("BC as mass")[3] = -1.0;
  CHECK(code_of([&] { reference_step(in, small(10)); }) == ErrorCode::kInvalidInput);
  in = generate_inputs(small(10));
  in.column("Rel. Humidity")[0] = 1.5;
  CHECK(code_of([&] { reference_step(in, small(10)); }) == ErrorCode::kInvalidInput);
}

TEST_CASE("zero inflation of ns mass tendencies") {
  const auto& s = builtin_schema();
  const auto d = generate_dataset(small(100000));
  const auto t = compute_tendencies(d.inputs, d.outputs, s);
  const auto& ns = t.column("SO4 ns mass");
  const double frac = static_cast<double>(std::count(ns.begin(), ns.end(), 0.0)) / ns.size();
  CHECK(frac >= 0.20);
}

TEST_CASE("heavy tails in at least five variables") {
  const auto& s = builtin_schema();
  const auto d = generate_dataset(small(100000));
  const auto t = compute_tendencies(d.inputs, d.outputs, s);
  std::size_t heavy = 0;
  for (const auto& col : t.columns) {
    std::vector<double> mag, nz;
    for (double v : col) {
      mag.push_back(std::fabs(v));
      if (v != 0.0) nz.push_back(std::fabs(v));
    }
    if (nz.empty()) continue;
    std::sort(mag.begin(), mag.end());
    std::sort(nz.begin(), nz.end());
    const double p999 = mag[static_cast<std::size_t>(0.999 * (mag.size() - 1))];
    const double med = nz[nz.size() / 2];
    heavy += p999 / med >= 1e3;
  }
  CHECK(heavy >= 5);
}

TEST_CASE("both signs of concentration tendencies occur") {
  const auto& s = builtin_schema();
  const auto d = generate_dataset(small(20000));
  const auto t = compute_tendencies(d.inputs, d.outputs, s);
  for (const char* name : {"ns concentration", "ks concentration", "as concentration", "cs concentration"}) {
    const auto& c = t.column(name);
    CHECK(std::any_of(c.begin(), c.end(), [](double v) { return v > 0; }));
    CHECK(std::any_of(c.begin(), c.end(), [](double v) { return v < 0; }));
  }
}

TEST_CASE("water follows the documented closed form") {
  const auto d = generate_dataset(small(1000));
  for (std::size_t r = 0; r < 1000; ++r) {
    const double rh = d.inputs.column("Rel. Humidity")[r];
    const double hyg = 0.5 * rh / (1.05 - rh);
    const double want = hyg * (d.outputs.column("SO4 cs mass")[r] + 0.3 * d.outputs.column("OC cs mass")[r] +
                               2.0 * d.inputs.column("SS cs mass")[r]);
    REQUIRE(d.outputs.column("cs water")[r] == doctest::Approx(want).epsilon(1e-12));
    REQUIRE(d.outputs.column("ns water")[r] >= 0.0);
  }
}

TEST_CASE("process strengths switch processes off") {
  SurrogateConfig c = small(2000);
  c.strengths = {0.0, 0.0, 0.0, 0.0};
  const auto d = generate_dataset(c);
  const auto t = compute_tendencies(d.inputs, d.outputs, builtin_schema());
  for (std::size_t col = 0; col < t.n_cols(); ++col) {
    for (double v : t.columns[col]) REQUIRE(v == 0.0);
  }
}

TEST_CASE("config JSON round trip") {
  SurrogateConfig c = small(77, 9);
  c.zero_inflation = 0.1;
  c.strengths.water_uptake = 2.0;
  CHECK(SurrogateConfig::from_json(nlohmann::json::parse(c.to_json().dump())) == c);
  CHECK(SurrogateConfig::from_json(nlohmann::json::object()) == SurrogateConfig{});
}
