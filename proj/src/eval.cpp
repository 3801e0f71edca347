#include "aemu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

#include "aemu/dataset_io.hpp"
#include "aemu/error.hpp"

namespace aemu {

namespace {

void check_lengths(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction has " + std::to_string(pred.size()) +
                                                   " values, truth has " + std::to_string(truth.size()));
  }
  if (truth.size() < 2) throw Error(ErrorCode::kInvalidInput, "metrics need at least 2 values");
}

}  // namespace

double r_squared(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth[i] - pred[i];
    const double d = truth[i] - mean;
    ss_res += e * e;
    ss_tot += d * d;
  }
  const bool constant = std::all_of(truth.begin(), truth.end(), [&](double t) { return t == truth[0]; });
  if (constant) {
    return std::equal(pred.begin(), pred.end(), truth.begin()) ? 1.0 : kUndefinedR2;
  }
  return 1.0 - ss_res / ss_tot;
}

double nrmse(std::span<const double> pred, std::span<const double> truth, double std_truth) {
  check_lengths(pred, truth);
  if (!(std_truth > 0.0)) throw Error(ErrorCode::kInvalidValue, "nrmse needs a positive normalising std");
  double ss = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = pred[i] - truth[i];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(truth.size())) / std_truth;
}

std::size_t EvalReport::count_r2_at_least(double threshold) const {
  return static_cast<std::size_t>(std::count_if(per_variable.begin(), per_variable.end(),
                                                [&](const VariableScore& v) { return v.r2_transformed >= threshold; }));
}

namespace {

nlohmann::json r2_json(double v) { return r2_defined(v) ? nlohmann::json(v) : nlohmann::json("undefined"); }

std::string r2_text(double v) {
  if (!r2_defined(v)) return "undefined";
  char buf[32];
  if (std::fabs(v) >= 1e4) {
    std::snprintf(buf, sizeof(buf), "%.3g", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.4f", v);
  }
  return buf;
}

double mean_defined(const std::vector<VariableScore>& rows, double VariableScore::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    const double v = r.*field;
    if (!r2_defined(v)) continue;
    sum += v;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : kUndefinedR2;
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : per_variable) {
    vars.push_back({{"name", v.name},
                    {"r2_transformed", r2_json(v.r2_transformed)},
                    {"nrmse", v.nrmse},
                    {"r2_raw_tendency", r2_json(v.r2_raw_tendency)},
                    {"r2_full_value", r2_json(v.r2_full_value)}});
  }
  nlohmann::json bias = nlohmann::json::array();
  for (const auto& b : mass_bias) {
    bias.push_back({{"species", b.species},
                    {"mean", b.mean},
                    {"median", b.median},
                    {"fraction_positive", b.fraction_positive}});
  }
  return {{"n_rows", n_rows},
          {"aggregate",
           {{"mean_r2_transformed", r2_json(mean_r2_transformed)},
            {"mean_nrmse", mean_nrmse},
            {"mean_r2_raw_tendency", r2_json(mean_r2_raw_tendency)},
            {"mean_r2_full_value", r2_json(mean_r2_full_value)}}},
          {"per_variable", std::move(vars)},
          {"mass_bias", std::move(bias)}};
}

std::string EvalReport::to_table() const {
  std::size_t width = std::string("Variable").size();
  for (const auto& v : per_variable) width = std::max(width, v.name.size());
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto lpad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  constexpr std::size_t kCol = 12;
  std::string out;
  out += pad("Variable", width) + lpad("R2", kCol) + lpad("NRMSE", kCol) + lpad("R2 tend", kCol) +
         lpad("R2 full", kCol) + "\n";
  out += std::string(width + 4 * kCol, '-') + "\n";
  char buf[32];
  for (const auto& v : per_variable) {
    std::snprintf(buf, sizeof(buf), "%.4f", v.nrmse);
    out += pad(v.name, width) + lpad(r2_text(v.r2_transformed), kCol) + lpad(buf, kCol) +
           lpad(r2_text(v.r2_raw_tendency), kCol) + lpad(r2_text(v.r2_full_value), kCol) + "\n";
  }
  out += std::string(width + 4 * kCol, '-') + "\n";
  std::snprintf(buf, sizeof(buf), "%.4f", mean_nrmse);
  out += pad("mean", width) + lpad(r2_text(mean_r2_transformed), kCol) + lpad(buf, kCol) +
         lpad(r2_text(mean_r2_raw_tendency), kCol) + lpad(r2_text(mean_r2_full_value), kCol) + "\n";
  out += "\nMass bias of predicted minus true tendency, summed over modes (" + std::to_string(n_rows) + " rows)\n";
  out += pad("Species", 8) + lpad("mean", 14) + lpad("median", 14) + lpad("frac > 0", 10) + "\n";
  for (const auto& b : mass_bias) {
    char m[32], md[32], fp[32];
    std::snprintf(m, sizeof(m), "%.4g", b.mean);
    std::snprintf(md, sizeof(md), "%.4g", b.median);
    std::snprintf(fp, sizeof(fp), "%.3f", b.fraction_positive);
    out += pad(b.species, 8) + lpad(m, 14) + lpad(md, 14) + lpad(fp, 10) + "\n";
  }
  return out;
}

std::vector<MassBias> mass_bias(const SampleBatch& pred, const SampleBatch& truth, const VariableSchema& schema) {
  if (pred.space != Space::kRaw || truth.space != Space::kRaw) {
    throw Error(ErrorCode::kSpaceMismatch, "mass_bias expects raw tendencies");
  }
  if (pred.names != truth.names || pred.n_rows() != truth.n_rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "mass_bias batches differ in shape");
  }
  // Species in first-appearance order among the mass columns.
  std::vector<std::pair<Species, std::vector<std::size_t>>> groups;
  for (std::size_t c = 0; c < pred.names.size(); ++c) {
    const auto& def = schema.lookup(pred.names[c]);
    if (def.kind != VariableKind::kSpeciesMass || !def.species) continue;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == *def.species; });
    if (it == groups.end()) {
      groups.push_back({*def.species, {}});
      it = std::prev(groups.end());
    }
    it->second.push_back(c);
  }
  const std::size_t n = pred.n_rows();
  std::vector<MassBias> out;
  std::vector<double> delta(n);
  for (const auto& [species, cols] : groups) {
    for (std::size_t r = 0; r < n; ++r) {
      double p = 0.0, t = 0.0;
      for (auto c : cols) {
        p += pred.columns[c][r];
        t += truth.columns[c][r];
      }
      delta[r] = p - t;
    }
    MassBias b;
    b.species = std::string(to_string(species));
    if (n > 0) {
      b.mean = std::accumulate(delta.begin(), delta.end(), 0.0) / static_cast<double>(n);
      double positive = 0.0;
      for (double d : delta) positive += d > 0.0 ? 1.0 : (d == 0.0 ? 0.5 : 0.0);
      b.fraction_positive = positive / static_cast<double>(n);
      std::vector<double> sorted = delta;
      const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(n / 2);
      std::nth_element(sorted.begin(), mid, sorted.end());
      b.median = *mid;
      if (n % 2 == 0) b.median = 0.5 * (b.median + *std::max_element(sorted.begin(), mid));
    }
    out.push_back(std::move(b));
  }
  return out;
}

SampleBatch predict_standardized(const Network& net, const TransformSpec& spec, const SampleBatch& inputs,
                                 const VariableSchema& schema, std::size_t threads) {
  const SampleBatch z = apply_pipeline(inputs, spec, schema);
  const Matrix<float> x = to_matrix<float>(z);
  const Matrix<double> y = forward_parallel(net, x, threads).cast<double>();
  SampleBatch like;
  like.role = Role::kOutput;
  like.names = schema.output_names();
  return from_matrix(y, like, Space::kStandardized);
}

EvalReport evaluate_predictions(const SampleBatch& pred_std, const TransformSpec& spec, const SampleBatch& inputs,
                                const SampleBatch& truth_outputs, const VariableSchema& schema) {
  check_spec_matches(spec, schema);
  if (pred_std.space != Space::kStandardized || pred_std.role != Role::kOutput) {
    throw Error(ErrorCode::kSpaceMismatch, "predictions must be standardized outputs");
  }
  if (pred_std.n_rows() != inputs.n_rows() || truth_outputs.n_rows() != inputs.n_rows()) {
    throw Error(ErrorCode::kRowCountMismatch, "predictions, inputs and truth differ in row count");
  }
  validate_columns(schema, pred_std.names, Role::kOutput);

  const SampleBatch truth_tend = compute_tendencies(inputs, truth_outputs, schema);
  const SampleBatch truth_tr = to_transformed(truth_tend);
  const SampleBatch pred_tr = destandardize(pred_std, spec, schema);
  const SampleBatch truth_std = standardize(truth_tr, spec, schema);
  const SampleBatch pred_raw = from_transformed(pred_tr);
  const SampleBatch pred_full = reconstruct_full_values(inputs, pred_raw, schema);

  EvalReport report;
  report.n_rows = inputs.n_rows();
  for (std::size_t c = 0; c < pred_std.n_cols(); ++c) {
    VariableScore s;
    s.name = pred_std.names[c];
    s.r2_transformed = r_squared(pred_std.columns[c], truth_std.columns[c]);
    s.nrmse = nrmse(pred_tr.columns[c], truth_tr.columns[c], spec.outputs[c].std);
    s.r2_raw_tendency = r_squared(pred_raw.columns[c], truth_tend.columns[c]);
    s.r2_full_value = r_squared(pred_full.columns[c], truth_outputs.columns[c]);
    report.per_variable.push_back(std::move(s));
  }
  report.mean_r2_transformed = mean_defined(report.per_variable, &VariableScore::r2_transformed);
  report.mean_r2_raw_tendency = mean_defined(report.per_variable, &VariableScore::r2_raw_tendency);
  report.mean_r2_full_value = mean_defined(report.per_variable, &VariableScore::r2_full_value);
  report.mean_nrmse = mean_defined(report.per_variable, &VariableScore::nrmse);
  report.mass_bias = mass_bias(pred_raw, truth_tend, schema);
  return report;
}

EvalReport evaluate(const Network& net, const TransformSpec& spec, const SampleBatch& inputs,
                    const SampleBatch& truth_outputs, const VariableSchema& schema, std::size_t threads) {
  check_spec_matches(spec, schema);
  return evaluate_predictions(predict_standardized(net, spec, inputs, schema, threads), spec, inputs, truth_outputs,
                              schema);
}

std::size_t MassFixResult::total_clamped() const { return std::accumulate(clamped.begin(), clamped.end(), std::size_t{0}); }

MassFixResult mass_fix(const SampleBatch& full_values, const VariableSchema& schema) {
  MassFixResult out{full_values, std::vector<std::size_t>(full_values.n_cols(), 0)};
  for (std::size_t c = 0; c < full_values.n_cols(); ++c) {
    const auto kind = schema.lookup(full_values.names[c]).kind;
    if (kind == VariableKind::kAtmosphericState) continue;
    for (auto& v : out.values.columns[c]) {
      if (v < 0.0) {
        v = 0.0;
        ++out.clamped[c];
      }
    }
  }
  return out;
}

std::vector<std::size_t> scatter_subsample(std::size_t n, std::size_t max_points, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= max_points) return idx;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first max_points slots become the sample.
  for (std::size_t i = 0; i < max_points; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max_points);
  std::sort(idx.begin(), idx.end());
  return idx;
}

ScatterFiles export_scatter(std::span<const double> pred, std::span<const double> truth, std::string_view variable,
                            const std::filesystem::path& stem, const ScatterOptions& options) {
  if (pred.size() != truth.size()) throw Error(ErrorCode::kDimensionMismatch, "scatter vectors differ in length");
  const auto idx = scatter_subsample(truth.size(), options.max_points, options.seed);

  ScatterFiles files;
  files.n_points = idx.size();
  files.csv = stem;
  files.csv += ".csv";
  std::string csv = "truth,pred\n";
  char buf[96];
  for (auto i : idx) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", truth[i], pred[i]);
    csv += buf;
  }
  write_file_atomic(files.csv, csv);
  if (!options.write_svg) return files;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (auto i : idx) {
    lo = std::min({lo, truth[i], pred[i]});
    hi = std::max({hi, truth[i], pred[i]});
  }
  if (idx.empty()) lo = 0.0, hi = 1.0;
  if (hi <= lo) lo -= 1.0, hi += 1.0;
  constexpr double kSize = 480.0, kMargin = 48.0;
  auto px = [&](double v) { return kMargin + (v - lo) / (hi - lo) * kSize; };
  auto py = [&](double v) { return kMargin + kSize - (v - lo) / (hi - lo) * kSize; };

  std::string svg;
  const double total = kSize + 2 * kMargin;
  std::snprintf(buf, sizeof(buf), "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n", total,
                total);
  svg += buf;
  svg += "<title>" + std::string(variable) + ": predicted vs true</title>\n";
  std::snprintf(buf, sizeof(buf), "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#444\"/>\n",
                kMargin, kMargin, kSize, kSize);
  svg += buf;
  std::snprintf(buf, sizeof(buf), "<line class=\"diagonal\" x1=\"%.4f\" y1=\"%.4f\" x2=\"%.4f\" y2=\"%.4f\" stroke=\"#c33\"/>\n",
                px(lo), py(lo), px(hi), py(hi));
  svg += buf;
  for (auto i : idx) {
    std::snprintf(buf, sizeof(buf), "<circle cx=\"%.4f\" cy=\"%.4f\" r=\"1.2\" fill=\"#1f77b4\" fill-opacity=\"0.4\"/>\n",
                  px(truth[i]), py(pred[i]));
    svg += buf;
  }
  std::snprintf(buf, sizeof(buf), "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">true</text>\n", total / 2,
                total - 12);
  svg += buf;
  std::snprintf(buf, sizeof(buf), "<text x=\"14\" y=\"%.1f\" transform=\"rotate(-90 14 %.1f)\" text-anchor=\"middle\">predicted</text>\n",
                total / 2, total / 2);
  svg += buf;
  std::snprintf(buf, sizeof(buf), "<text x=\"%.1f\" y=\"30\" text-anchor=\"middle\">", total / 2);
  svg += buf;
  svg += std::string(variable) + "</text>\n</svg>\n";
  files.svg = stem;
  files.svg += ".svg";
  write_file_atomic(files.svg, svg);
  return files;
}

}  // namespace aemu
