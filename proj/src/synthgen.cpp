#include "aemu/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "aemu/error.hpp"
#include "aemu/parallel.hpp"

// Toy stand-in for one microphysics step. All process forms are closed-form,
// smooth in the inputs, and bounded so that no mass or number goes negative.
// Values are in arbitrary model units (not physically scaled); the H2SO4 and
// SO4 columns share one unit so their combined total is conserved.
//
// Per row, with theta = (T - 180)/130 clamped to [0, 1] and dt = 450 s:
//
//   nucleation     f_nuc = 1 - exp(-s_n * 0.2 * a^2 * (1 - theta/2) * P/(P + 100) * (1/2 + ion/(2(ion + 5))))
//                  a = max(0, (RH - 0.5)/0.5); nucleated mass f_nuc*H -> SO4 ns,
//                  new ns particles 0.5 per unit mass.
//   condensation   sink S = N_ks + 4 N_as + 10 N_cs;
//                  f_c = (1 - f_nuc)(1 - exp(-s_c * 0.7 (1/2 + RH/2)(1.2 - 0.4 theta) S/(S + 1000)));
//                  f_c*H -> SO4 ks/as/cs in proportion to each mode's share of S.
//   coating        c = 1 - exp(-H/100); insoluble modes age into soluble ones:
//                  g_ki = 1 - exp(-s_c 0.35 c (1/2 + RH/2)), g_ai = 1 - exp(-s_c 0.22 c RH),
//                  g_ci = 1 - exp(-s_c 0.1 c RH); ki->ks, ai->as, ci->cs (mass and number).
//   coagulation    scavenging by the next larger soluble mode moves mass:
//                  g_ns = 1 - exp(-s_k 1e-5 N_ks (1 + theta)), g_ks = 1 - exp(-s_k 3e-6 N_as),
//                  g_as = 1 - exp(-s_k 1e-6 N_cs); ns->ks, ks->as, as->cs.
//                  Scavenged particles are lost from the source mode; each mode then
//                  self-coagulates, N' = N/(1 + s_k k_m N) with the k_m below.
//   water uptake   W_m = s_w * 0.5 * RH/(1.05 - RH) * (SO4_m + 0.3 OC_m + 2 SS_m), after the step.

namespace aemu {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream: draw k of row r is a pure function of (seed, r, k).
class RowStream {
 public:
  RowStream(std::uint64_t seed, std::uint64_t row) : key_(splitmix64(seed ^ splitmix64(row))) {}

  double uniform() { return static_cast<double>(splitmix64(key_ + kGolden * ++counter_) >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double log_uniform(double lo, double hi) {
    return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * uniform());
  }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

constexpr double kMassLo = 1e-2, kMassHi = 1e5;
constexpr double kNumberLo = 1e-2, kNumberHi = 1e5;

enum M { kNs, kKs, kAs, kCs, kKi, kAi, kCi, kModes };
constexpr std::array<double, kModes> kSelfCoagulation = {1e-5, 5e-6, 1e-6, 1e-7, 4e-6, 1e-6, 1e-7};

// Column positions resolved by name once per call.
struct InputColumns {
  std::size_t pressure, temperature, humidity, ionization, cloud, boundary, forest, production;
  std::size_t ss_as, ss_cs, h2so4;
  std::array<std::size_t, 4> so4;  // ns ks as cs
  std::array<std::size_t, 4> bc;   // ks as cs ki
  std::array<std::size_t, 4> oc;   // ks as cs ki
  std::array<std::size_t, 4> du;   // as cs ai ci
  std::array<std::size_t, kModes> number;

  explicit InputColumns(const VariableSchema& s) {
    auto at = [&](std::string_view name) {
      auto pos = s.input_position(name);
      if (!pos) throw Error(ErrorCode::kMissingColumn, "schema lacks input '" + std::string(name) + "'", std::string(name));
      return *pos;
    };
    pressure = at("Pressure");
    temperature = at("Temperature");
    humidity = at("Rel. Humidity");
    ionization = at("ionization rate");
    cloud = at("cloud cover");
    boundary = at("Boundary layer");
    forest = at("Forest fraction");
    production = at("H2SO4 prod. rate");
    ss_as = at("SS as mass");
    ss_cs = at("SS cs mass");
    h2so4 = at("H2SO4 mass");
    so4 = {at("SO4 ns mass"), at("SO4 ks mass"), at("SO4 as mass"), at("SO4 cs mass")};
    bc = {at("BC ks mass"), at("BC as mass"), at("BC cs mass"), at("BC ki mass")};
    oc = {at("OC ks mass"), at("OC as mass"), at("OC cs mass"), at("OC ki mass")};
    du = {at("DU as mass"), at("DU cs mass"), at("DU ai mass"), at("DU ci mass")};
    number = {at("ns concentration"), at("ks concentration"), at("as concentration"), at("cs concentration"),
              at("ki concentration"), at("ai concentration"), at("ci concentration")};
  }
};

struct OutputColumns {
  std::size_t h2so4;
  std::array<std::size_t, 4> so4, bc, oc, du;
  std::array<std::size_t, kModes> number;
  std::array<std::size_t, 4> water;  // ns ks as cs

  explicit OutputColumns(const VariableSchema& s) {
    const auto& names = s.output_names();
    auto at = [&](std::string_view name) {
      for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return i;
      }
      throw Error(ErrorCode::kMissingColumn, "schema lacks output '" + std::string(name) + "'", std::string(name));
    };
    h2so4 = at("H2SO4 mass");
    so4 = {at("SO4 ns mass"), at("SO4 ks mass"), at("SO4 as mass"), at("SO4 cs mass")};
    bc = {at("BC ks mass"), at("BC as mass"), at("BC cs mass"), at("BC ki mass")};
    oc = {at("OC ks mass"), at("OC as mass"), at("OC cs mass"), at("OC ki mass")};
    du = {at("DU as mass"), at("DU cs mass"), at("DU ai mass"), at("DU ci mass")};
    number = {at("ns concentration"), at("ks concentration"), at("as concentration"), at("cs concentration"),
              at("ki concentration"), at("ai concentration"), at("ci concentration")};
    water = {at("ns water"), at("ks water"), at("as water"), at("cs water")};
  }
};

// Makes (after - before) + before reproduce `after` exactly in floating point.
double snap(double before, double after) {
  for (int i = 0; i < 8; ++i) {
    const double next = before + (after - before);
    if (next == after) break;
    after = next;
  }
  return after;
}

}  // namespace

void SurrogateConfig::validate() const {
  if (n_samples == 0) throw Error(ErrorCode::kEmptyRequest, "n_samples must be at least 1");
  if (!(zero_inflation >= 0.0 && zero_inflation <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "zero_inflation must lie in [0, 1]");
  }
  for (double s : {strengths.nucleation, strengths.coagulation, strengths.condensation, strengths.water_uptake}) {
    if (!std::isfinite(s) || s < 0.0) throw Error(ErrorCode::kInvalidConfig, "process strengths must be finite and >= 0");
  }
}

nlohmann::json SurrogateConfig::to_json() const {
  return {{"seed", seed},
          {"n_samples", n_samples},
          {"zero_inflation", zero_inflation},
          {"process_strengths",
           {{"nucleation", strengths.nucleation},
            {"coagulation", strengths.coagulation},
            {"condensation", strengths.condensation},
            {"water_uptake", strengths.water_uptake}}}};
}

SurrogateConfig SurrogateConfig::from_json(const nlohmann::json& j) {
  SurrogateConfig c;
  c.seed = j.value("seed", c.seed);
  c.n_samples = j.value("n_samples", c.n_samples);
  c.zero_inflation = j.value("zero_inflation", c.zero_inflation);
  if (j.contains("process_strengths")) {
    const auto& p = j.at("process_strengths");
    c.strengths.nucleation = p.value("nucleation", c.strengths.nucleation);
    c.strengths.coagulation = p.value("coagulation", c.strengths.coagulation);
    c.strengths.condensation = p.value("condensation", c.strengths.condensation);
    c.strengths.water_uptake = p.value("water_uptake", c.strengths.water_uptake);
  }
  return c;
}

SampleBatch generate_inputs(const SurrogateConfig& config, const VariableSchema& schema, std::size_t threads) {
  config.validate();
  const InputColumns col(schema);
  SampleBatch batch(schema, Role::kInput, Space::kRaw, config.n_samples);
  auto& c = batch.columns;
  const double z = config.zero_inflation;

  parallel_for(config.n_samples, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      RowStream rng(config.seed, r);
      c[col.pressure][r] = rng.log_uniform(10.0, 105000.0);
      c[col.temperature][r] = rng.uniform(180.0, 310.0);
      c[col.humidity][r] = rng.uniform();
      c[col.ionization][r] = rng.uniform(0.0, 20.0);
      c[col.cloud][r] = rng.uniform();
      c[col.boundary][r] = rng.uniform();
      c[col.forest][r] = rng.uniform();
      c[col.production][r] = rng.log_uniform(1e-2, 1e6);

      std::array<bool, kModes> empty{};
      for (auto& e : empty) e = rng.bernoulli(z);
      const bool no_gas = rng.bernoulli(z);

      auto mass = [&](M mode) {
        const double v = rng.log_uniform(kMassLo, kMassHi);
        return empty[mode] ? 0.0 : v;
      };
      c[col.ss_as][r] = mass(kAs);
      c[col.ss_cs][r] = mass(kCs);
      const double h = rng.log_uniform(kMassLo, kMassHi);
      c[col.h2so4][r] = no_gas ? 0.0 : h;
      const std::array<M, 4> so4_modes{kNs, kKs, kAs, kCs};
      const std::array<M, 4> carbon_modes{kKs, kAs, kCs, kKi};
      const std::array<M, 4> dust_modes{kAs, kCs, kAi, kCi};
      for (std::size_t i = 0; i < 4; ++i) c[col.so4[i]][r] = mass(so4_modes[i]);
      for (std::size_t i = 0; i < 4; ++i) c[col.bc[i]][r] = mass(carbon_modes[i]);
      for (std::size_t i = 0; i < 4; ++i) c[col.oc[i]][r] = mass(carbon_modes[i]);
      for (std::size_t i = 0; i < 4; ++i) c[col.du[i]][r] = mass(dust_modes[i]);
      for (std::size_t m = 0; m < kModes; ++m) {
        const double v = rng.log_uniform(kNumberLo, kNumberHi);
        c[col.number[m]][r] = empty[m] ? 0.0 : v;
      }
    }
  });
  return batch;
}

SampleBatch reference_step(const SampleBatch& inputs, const SurrogateConfig& config, const VariableSchema& schema,
                           std::size_t threads) {
  if (inputs.role != Role::kInput || inputs.space != Space::kRaw) {
    throw Error(ErrorCode::kSpaceMismatch, "reference_step expects a raw input batch");
  }
  validate_columns(schema, inputs.names, Role::kInput);
  inputs.check_finite_and_rectangular();
  const InputColumns in(schema);
  const OutputColumns out_col(schema);
  const auto& x = inputs.columns;
  const std::size_t n = inputs.n_rows();

  for (std::size_t r = 0; r < n; ++r) {
    const double rh = x[in.humidity][r];
    if (!(rh >= 0.0 && rh <= 1.0)) {
      throw Error(ErrorCode::kInvalidInput, "relative humidity outside [0, 1] at row " + std::to_string(r),
                  std::to_string(r));
    }
    if (x[in.ionization][r] < 0.0 || x[in.production][r] < 0.0) {
      throw Error(ErrorCode::kInvalidInput, "negative rate at row " + std::to_string(r), std::to_string(r));
    }
  }
  for (std::size_t c = 0; c < schema.count_inputs(); ++c) {
    const auto kind = schema.input(c).kind;
    if (kind != VariableKind::kSpeciesMass && kind != VariableKind::kModeConcentration) continue;
    for (std::size_t r = 0; r < n; ++r) {
      if (x[c][r] < 0.0) {
        throw Error(ErrorCode::kInvalidInput,
                    "negative value in '" + schema.input(c).name + "' at row " + std::to_string(r), std::to_string(r));
      }
    }
  }

  const auto& s = config.strengths;
  SampleBatch out(schema, Role::kOutput, Space::kRaw, n);
  auto& y = out.columns;

  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const double temp = x[in.temperature][r];
      const double rh = x[in.humidity][r];
      const double ion = x[in.ionization][r];
      const double prod = x[in.production][r];
      const double h = x[in.h2so4][r];
      const double theta = std::clamp((temp - 180.0) / 130.0, 0.0, 1.0);
      std::array<double, 4> so4, bc, oc, du;
      std::array<double, kModes> num;
      for (std::size_t i = 0; i < 4; ++i) {
        so4[i] = x[in.so4[i]][r];
        bc[i] = x[in.bc[i]][r];
        oc[i] = x[in.oc[i]][r];
        du[i] = x[in.du[i]][r];
      }
      for (std::size_t m = 0; m < kModes; ++m) num[m] = x[in.number[m]][r];

      // Nucleation.
      const double act = std::max(0.0, (rh - kNucleationHumidityThreshold) / (1.0 - kNucleationHumidityThreshold));
      const double f_nuc = -std::expm1(-s.nucleation * 0.2 * act * act * (1.0 - 0.5 * theta) * prod / (prod + 100.0) *
                                       (0.5 + 0.5 * ion / (ion + 5.0)));
      const double nucleated = f_nuc * h;

      // Condensation onto soluble ks/as/cs in proportion to their sink share.
      const std::array<double, 3> sink_part{num[kKs], 4.0 * num[kAs], 10.0 * num[kCs]};
      const double sink = sink_part[0] + sink_part[1] + sink_part[2];
      const double f_cond = (1.0 - f_nuc) * -std::expm1(-s.condensation * 0.7 * (0.5 + 0.5 * rh) *
                                                        (1.2 - 0.4 * theta) * sink / (sink + 1000.0));
      const double condensed = f_cond * h;
      std::array<double, 3> cond{0.0, 0.0, 0.0};
      if (sink > 0.0) {
        cond[0] = condensed * sink_part[0] / sink;
        cond[1] = condensed * sink_part[1] / sink;
        cond[2] = condensed - cond[0] - cond[1];
      }

      // Coating ages insoluble modes into soluble ones.
      const double coat = -std::expm1(-h / 100.0);
      const double g_ki = -std::expm1(-s.condensation * 0.35 * coat * (0.5 + 0.5 * rh));
      const double g_ai = -std::expm1(-s.condensation * 0.22 * coat * rh);
      const double g_ci = -std::expm1(-s.condensation * 0.1 * coat * rh);

      // Coagulation: scavenging toward larger soluble modes.
      const double g_ns = -std::expm1(-s.coagulation * 1e-5 * num[kKs] * (1.0 + theta));
      const double g_ks = -std::expm1(-s.coagulation * 3e-6 * num[kAs]);
      const double g_as = -std::expm1(-s.coagulation * 1e-6 * num[kCs]);

      // Mass transfers: each source loses one fraction of its pre-step mass.
      const double so4_ns_ks = g_ns * so4[0], so4_ks_as = g_ks * so4[1], so4_as_cs = g_as * so4[2];
      std::array<double, 4> so4_new{
          so4[0] + nucleated - so4_ns_ks,
          so4[1] + cond[0] + so4_ns_ks - so4_ks_as,
          so4[2] + cond[1] + so4_ks_as - so4_as_cs,
          so4[3] + cond[2] + so4_as_cs,
      };
      const double h_new = h - nucleated - condensed;

      auto carbon = [&](const std::array<double, 4>& m) {  // ks as cs ki
        const double ki_ks = g_ki * m[3], ks_as = g_ks * m[0], as_cs = g_as * m[1];
        return std::array<double, 4>{m[0] + ki_ks - ks_as, m[1] + ks_as - as_cs, m[2] + as_cs, m[3] - ki_ks};
      };
      const auto bc_new = carbon(bc);
      const auto oc_new = carbon(oc);
      const double ai_as = g_ai * du[2], ci_cs = g_ci * du[3], du_as_cs = g_as * du[0];
      const std::array<double, 4> du_new{du[0] + ai_as - du_as_cs, du[1] + du_as_cs + ci_cs, du[2] - ai_as,
                                         du[3] - ci_cs};

      // Numbers: scavenging and ageing losses, then self-coagulation.
      std::array<double, kModes> lost{g_ns * num[kNs], g_ks * num[kKs], g_as * num[kAs], 0.0,
                                      g_ki * num[kKi], g_ai * num[kAi], g_ci * num[kCi]};
      std::array<double, kModes> gained{0.5 * nucleated, g_ki * num[kKi], g_ai * num[kAi], g_ci * num[kCi], 0.0, 0.0, 0.0};
      std::array<double, kModes> num_new{};
      for (std::size_t m = 0; m < kModes; ++m) {
        const double remaining = num[m] - lost[m];
        const double coagulated = remaining / (1.0 + s.coagulation * kSelfCoagulation[m] * remaining);
        num_new[m] = coagulated + gained[m];
      }

      y[out_col.h2so4][r] = snap(h, h_new);
      for (std::size_t i = 0; i < 4; ++i) {
        y[out_col.so4[i]][r] = snap(so4[i], so4_new[i]);
        y[out_col.bc[i]][r] = snap(bc[i], bc_new[i]);
        y[out_col.oc[i]][r] = snap(oc[i], oc_new[i]);
        y[out_col.du[i]][r] = snap(du[i], du_new[i]);
      }
      for (std::size_t m = 0; m < kModes; ++m) y[out_col.number[m]][r] = snap(num[m], num_new[m]);

      const double hyg = s.water_uptake * 0.5 * rh / (1.05 - rh);
      const double ss_as = x[in.ss_as][r], ss_cs = x[in.ss_cs][r];
      y[out_col.water[0]][r] = hyg * so4_new[0];
      y[out_col.water[1]][r] = hyg * (so4_new[1] + 0.3 * oc_new[0]);
      y[out_col.water[2]][r] = hyg * (so4_new[2] + 0.3 * oc_new[1] + 2.0 * ss_as);
      y[out_col.water[3]][r] = hyg * (so4_new[3] + 0.3 * oc_new[2] + 2.0 * ss_cs);
    }
  });
  return out;
}

Dataset generate_dataset(const SurrogateConfig& config, const VariableSchema& schema, std::size_t threads) {
  Dataset d;
  d.inputs = generate_inputs(config, schema, threads);
  d.outputs = reference_step(d.inputs, config, schema, threads);
  return d;
}

}  // namespace aemu
