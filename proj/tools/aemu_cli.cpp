// Command-line front end: generate / train / evaluate / predict / bench / plot / schema.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "aemu/bench.hpp"
#include "aemu/dataset_io.hpp"
#include "aemu/error.hpp"
#include "aemu/eval.hpp"
#include "aemu/nn.hpp"
#include "aemu/pipeline.hpp"
#include "aemu/schema.hpp"
#include "aemu/synthgen.hpp"
#include "aemu/trainer.hpp"

#ifndef AEMU_VERSION
#define AEMU_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aemu;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int exit_code_for(const Error& e) {
  switch (category(e.code())) {
    case ErrorCategory::kUsage: return kExitUsage;
    case ErrorCategory::kData: return kExitData;
    case ErrorCategory::kNumerical: return kExitNumerical;
  }
  return kExitData;
}

struct ModelConfig {
  std::size_t hidden_layers = 2;
  std::size_t width = 256;
  std::string activation = "sigmoid";
  std::uint64_t seed = 0;

  std::vector<std::size_t> dims(const VariableSchema& schema) const {
    std::vector<std::size_t> d{schema.count_inputs()};
    for (std::size_t i = 0; i < hidden_layers; ++i) d.push_back(width);
    d.push_back(schema.count_outputs());
    return d;
  }
  json to_json() const {
    return {{"hidden_layers", hidden_layers}, {"width", width}, {"activation", activation}, {"seed", seed}};
  }
  static ModelConfig from_json(const json& j) {
    ModelConfig c;
    c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
    c.width = j.value("width", c.width);
    c.activation = j.value("activation", c.activation);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

json bench_to_json(const BenchConfig& c) {
  return {{"n_samples", c.n_samples},
          {"repetitions", c.repetitions},
          {"warmup", c.warmup},
          {"parallel_threads", c.parallel_threads},
          {"seed", c.seed}};
}

BenchConfig bench_from_json(const json& j) {
  BenchConfig c;
  c.n_samples = j.value("n_samples", c.n_samples);
  c.repetitions = j.value("repetitions", c.repetitions);
  c.warmup = j.value("warmup", c.warmup);
  c.parallel_threads = j.value("parallel_threads", c.parallel_threads);
  c.seed = j.value("seed", c.seed);
  return c;
}

/// Flags explicitly given on the command line override the config file.
struct Overlay {
  std::vector<std::pair<CLI::Option*, std::function<void()>>> items;

  template <typename Cfg, typename F>
  CLI::Option* add(CLI::App* app, const std::string& name, Cfg& shadow, Cfg& target, F Cfg::*field,
                   const std::string& desc) {
    auto* opt = app->add_option(name, shadow.*field, desc)->capture_default_str();
    items.emplace_back(opt, [&shadow, &target, field] { target.*field = shadow.*field; });
    return opt;
  }
  void apply() const {
    for (const auto& [opt, set] : items) {
      if (opt->count() > 0) set();
    }
  }
};

/// Options every subcommand shares.
struct Common {
  std::size_t threads = 1;
  std::string config_path;
  json file_config = json::object();

  void add_to(CLI::App* app) {
    app->add_option("--threads", threads, "Worker threads for generation and inference")->capture_default_str();
    app->add_option("--config", config_path,
                    "JSON config file (or a previous run manifest); flags override it")
        ->check(CLI::ExistingFile);
  }

  void load() {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    try {
      file_config = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, "cannot parse config '" + config_path + "': " + e.what());
    }
    // Manifests nest the effective config; accept them directly.
    if (file_config.contains("subcommand") && file_config.contains("config")) {
      file_config = json(file_config.at("config"));
    }
    if (!file_config.is_object()) throw Error(ErrorCode::kInvalidConfig, "config must be a JSON object");
  }

  json section(const char* key) const { return file_config.value(key, json::object()); }
};

/// Collected per run and written as <primary output>.manifest.json.
struct Manifest {
  std::string subcommand;
  json config = json::object();
  json inputs = json::object();
  json outputs = json::object();
  fs::path path;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(int exit_status) const {
    if (path.empty()) return;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json j{{"subcommand", subcommand},
           {"config", config},
           {"inputs", inputs},
           {"outputs", outputs},
           {"schema_hash", builtin_schema().hash()},
           {"tool_version", AEMU_VERSION},
           {"duration_s", secs},
           {"exit_status", exit_status}};
    try {
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_file_atomic(path, j.dump(2) + "\n");
    } catch (const std::exception& e) {
      std::cerr << "warning: could not write manifest " << path << ": " << e.what() << "\n";
    }
  }
};

fs::path sibling_manifest(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

DataFormat dataset_format(const fs::path& dir, const std::string& flag) {
  if (!flag.empty()) return parse_format(flag);
  if (fs::exists(dataset_inputs_path(dir, DataFormat::kBinary))) return DataFormat::kBinary;
  if (fs::exists(dataset_inputs_path(dir, DataFormat::kCsv))) return DataFormat::kCsv;
  throw Error(ErrorCode::kIo, "no inputs.bin or inputs.csv in '" + dir.string() + "'");
}

const std::vector<std::string> kSpaces{"transformed", "tendency", "full"};

/// Network output as standardized predictions, from a saved file in `space`.
SampleBatch predictions_to_standardized(SampleBatch pred, const std::string& space, const SampleBatch& inputs,
                                        const TransformSpec& spec, const VariableSchema& schema) {
  if (space == "transformed") {
    pred.space = Space::kStandardized;
    return pred;
  }
  if (space == "full") pred = compute_tendencies(inputs, pred, schema);
  return apply_pipeline(pred, spec, schema);
}

std::string sanitize(std::string_view name) {
  std::string out;
  for (char ch : name) {
    const bool keep = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9');
    out += keep ? ch : '_';
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aerosol microphysics emulator toolkit"};
  app.set_version_flag("--version", AEMU_VERSION);
  app.require_subcommand(1);
  const VariableSchema& schema = builtin_schema();
  Manifest manifest;

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset with the reference surrogate");
  Common gen_common;
  gen_common.add_to(gen);
  SurrogateConfig gen_shadow, gen_cfg;
  Overlay gen_ov;
  std::string gen_out, gen_format = "binary";
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--format", gen_format, "csv or binary")->capture_default_str()->check(CLI::IsMember({"csv", "binary"}));
  gen_ov.add(gen, "--samples", gen_shadow, gen_cfg, &SurrogateConfig::n_samples, "Number of samples");
  gen_ov.add(gen, "--seed", gen_shadow, gen_cfg, &SurrogateConfig::seed, "Generator seed");
  gen_ov.add(gen, "--zero-inflation", gen_shadow, gen_cfg, &SurrogateConfig::zero_inflation,
             "Probability that a mode or the gas phase is empty");
  ProcessStrengths str_shadow;
  std::vector<std::pair<CLI::Option*, double ProcessStrengths::*>> str_opts;
  for (auto [name, field] : {std::pair{"--nucleation", &ProcessStrengths::nucleation},
                             std::pair{"--coagulation", &ProcessStrengths::coagulation},
                             std::pair{"--condensation", &ProcessStrengths::condensation},
                             std::pair{"--water-uptake", &ProcessStrengths::water_uptake}}) {
    str_opts.emplace_back(
        gen->add_option(name, str_shadow.*field, "Process strength multiplier")->capture_default_str(), field);
  }

  // train
  auto* tr = app.add_subcommand("train", "Fit the transform on training data and train a network");
  Common tr_common;
  tr_common.add_to(tr);
  TrainConfig tr_shadow, tr_cfg;
  ModelConfig model_shadow, model_cfg;
  Overlay tr_ov;
  std::string tr_train, tr_val, tr_out, tr_format;
  tr->add_option("--train", tr_train, "Training dataset directory")->required();
  tr->add_option("--val", tr_val, "Validation dataset directory")->required();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--format", tr_format, "Dataset format (csv or binary; default: detect)");
  tr_ov.add(tr, "--lr", tr_shadow, tr_cfg, &TrainConfig::learning_rate, "Adam learning rate");
  tr_ov.add(tr, "--weight-decay", tr_shadow, tr_cfg, &TrainConfig::weight_decay, "Decoupled weight decay");
  tr_ov.add(tr, "--batch-size", tr_shadow, tr_cfg, &TrainConfig::batch_size, "Mini-batch size");
  tr_ov.add(tr, "--patience", tr_shadow, tr_cfg, &TrainConfig::patience, "Early-stopping patience (epochs)");
  tr_ov.add(tr, "--max-epochs", tr_shadow, tr_cfg, &TrainConfig::max_epochs, "Maximum epochs");
  tr_ov.add(tr, "--beta1", tr_shadow, tr_cfg, &TrainConfig::beta1, "Adam beta1");
  tr_ov.add(tr, "--beta2", tr_shadow, tr_cfg, &TrainConfig::beta2, "Adam beta2");
  tr_ov.add(tr, "--epsilon", tr_shadow, tr_cfg, &TrainConfig::epsilon, "Adam epsilon");
  tr_ov.add(tr, "--shuffle-seed", tr_shadow, tr_cfg, &TrainConfig::shuffle_seed, "Mini-batch shuffle seed");
  tr_ov.add(tr, "--hidden-layers", model_shadow, model_cfg, &ModelConfig::hidden_layers,
            "Hidden layers (0 = linear regression)");
  tr_ov.add(tr, "--width", model_shadow, model_cfg, &ModelConfig::width, "Nodes per hidden layer");
  tr_ov.add(tr, "--activation", model_shadow, model_cfg, &ModelConfig::activation, "sigmoid, tanh or relu")
      ->check(CLI::IsMember({"sigmoid", "tanh", "relu"}));
  tr_ov.add(tr, "--init-seed", model_shadow, model_cfg, &ModelConfig::seed, "Weight initialization seed");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint (or saved predictions) on a dataset");
  Common ev_common;
  ev_common.add_to(ev);
  std::string ev_ckpt, ev_data, ev_out, ev_format, ev_pred, ev_pred_space = "transformed";
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--out", ev_out, "Report JSON path")->required();
  ev->add_option("--format", ev_format, "Dataset format (csv or binary; default: detect)");
  ev->add_option("--predictions", ev_pred, "Score this predictions file instead of running the network")
      ->check(CLI::ExistingFile);
  ev->add_option("--predictions-space", ev_pred_space, "Space the predictions file is in")
      ->capture_default_str()
      ->check(CLI::IsMember(kSpaces));

  // predict
  auto* pr = app.add_subcommand("predict", "Run a checkpoint on an inputs file");
  Common pr_common;
  pr_common.add_to(pr);
  std::string pr_ckpt, pr_inputs, pr_out, pr_space = "full";
  bool pr_mass_fix = false;
  pr->add_option("--checkpoint", pr_ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
  pr->add_option("--inputs", pr_inputs, "Inputs table (.csv or binary)")->required()->check(CLI::ExistingFile);
  pr->add_option("--out", pr_out, "Predictions table (.csv or binary)")->required();
  pr->add_option("--space", pr_space, "transformed (standardized network output), tendency or full")
      ->capture_default_str()
      ->check(CLI::IsMember(kSpaces));
  pr->add_flag("--mass-fix", pr_mass_fix, "Clamp negative full values to zero (requires --space full)");

  // bench
  auto* bn = app.add_subcommand("bench", "Time the emulator against the reference surrogate step");
  Common bn_common;
  bn_common.add_to(bn);
  BenchConfig bn_shadow, bn_cfg;
  Overlay bn_ov;
  std::string bn_ckpt, bn_out;
  bn->add_option("--checkpoint", bn_ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
  bn->add_option("--out", bn_out, "Result JSON path");
  bn_ov.add(bn, "--samples", bn_shadow, bn_cfg, &BenchConfig::n_samples, "Samples per timed call");
  bn_ov.add(bn, "--reps", bn_shadow, bn_cfg, &BenchConfig::repetitions, "Timed repetitions (median reported)");
  bn_ov.add(bn, "--warmup", bn_shadow, bn_cfg, &BenchConfig::warmup, "Untimed warmup runs");
  bn_ov.add(bn, "--parallel", bn_shadow, bn_cfg, &BenchConfig::parallel_threads,
            "Threads for an extra row-parallel emulator row (0 = off)");
  bn_ov.add(bn, "--seed", bn_shadow, bn_cfg, &BenchConfig::seed, "Input generation seed");

  // plot
  auto* pl = app.add_subcommand("plot", "Export predicted-vs-true scatter data (CSV + SVG) per variable");
  Common pl_common;
  pl_common.add_to(pl);
  std::string pl_ckpt, pl_data, pl_dir, pl_format, pl_space = "transformed";
  std::vector<std::string> pl_vars;
  ScatterOptions pl_opts;
  bool pl_no_svg = false;
  pl->add_option("--checkpoint", pl_ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
  pl->add_option("--data", pl_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  pl->add_option("--out-dir", pl_dir, "Directory for scatter files")->required();
  pl->add_option("--format", pl_format, "Dataset format (csv or binary; default: detect)");
  pl->add_option("--space", pl_space, "Space of plotted values")->capture_default_str()->check(CLI::IsMember(kSpaces));
  pl->add_option("--variables", pl_vars, "Output variables to plot (default: all)");
  pl->add_option("--max-points", pl_opts.max_points, "Points per plot (seeded subsample)")->capture_default_str();
  pl->add_option("--seed", pl_opts.seed, "Subsample seed")->capture_default_str();
  pl->add_flag("--no-svg", pl_no_svg, "Write CSV only");

  // schema
  auto* sc = app.add_subcommand("schema", "Write the variable schema as JSON");
  Common sc_common;
  sc_common.add_to(sc);
  std::string sc_out;
  sc->add_option("--out", sc_out, "Output JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      manifest.subcommand = "generate";
      manifest.path = fs::path(gen_out) / "manifest.json";
      gen_common.load();
      gen_cfg = SurrogateConfig::from_json(gen_common.section("surrogate"));
      gen_ov.apply();
      for (const auto& [opt, field] : str_opts) {
        if (opt->count() > 0) gen_cfg.strengths.*field = str_shadow.*field;
      }
      const DataFormat fmt = parse_format(gen_format);
      manifest.config = {{"surrogate", gen_cfg.to_json()}, {"format", gen_format}};
      gen_cfg.validate();
      const Dataset data = generate_dataset(gen_cfg, schema, gen_common.threads);
      write_dataset(gen_out, data, fmt);
      manifest.outputs = {{"inputs", dataset_inputs_path(gen_out, fmt).string()},
                          {"outputs", dataset_outputs_path(gen_out, fmt).string()}};
      std::cerr << "wrote " << data.inputs.n_rows() << " samples to " << gen_out << "\n";
    } else if (tr->parsed()) {
      manifest.subcommand = "train";
      manifest.path = sibling_manifest(tr_out);
      tr_common.load();
      tr_cfg = TrainConfig::from_json(tr_common.section("train"));
      model_cfg = ModelConfig::from_json(tr_common.section("model"));
      tr_ov.apply();
      manifest.config = {{"train", tr_cfg.to_json()}, {"model", model_cfg.to_json()}};
      manifest.inputs = {{"train", tr_train}, {"val", tr_val}};
      tr_cfg.validate();
      const Activation act = parse_activation(model_cfg.activation);

      const Dataset train_raw = read_dataset(tr_train, dataset_format(tr_train, tr_format), schema);
      const Dataset val_raw = read_dataset(tr_val, dataset_format(tr_val, tr_format), schema);
      const TransformSpec spec = fit_transform_spec(with_tendency_targets(train_raw, schema), schema);
      const TrainingData train_data = prepare_training_data(train_raw, spec, schema);
      const TrainingData val_data = prepare_training_data(val_raw, spec, schema);
      const auto dims = model_cfg.dims(schema);
      Network net = init_network<float>(dims, act, model_cfg.seed);

      const fs::path ckpt(tr_out);
      const fs::path history_path(tr_out + ".history.csv");
      if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
      std::vector<EpochRecord> history;
      TrainHooks hooks;
      hooks.on_epoch = [&](const EpochRecord& r) {
        history.push_back(r);
        std::fprintf(stderr, "epoch %4zu  train_mse %.6f  val_mse %.6f\n", r.epoch, r.train_mse, r.val_mse);
        write_file_atomic(history_path, history_csv(history));
      };
      hooks.on_improvement = [&](const Network& best, const EpochRecord&) { save_checkpoint(best, spec, ckpt); };
      const TrainResult result = train(std::move(net), train_data, val_data, tr_cfg, hooks);
      save_checkpoint(result.best_net, spec, ckpt);
      write_file_atomic(history_path, history_csv(result.history));
      manifest.outputs = {{"checkpoint", ckpt.string()},
                          {"history", history_path.string()},
                          {"best_epoch", result.best_epoch},
                          {"best_val_mse", result.best_val_mse},
                          {"epochs_run", result.epochs_run}};
      std::fprintf(stderr, "best epoch %zu (val_mse %.6f) after %zu epochs\n", result.best_epoch,
                   result.best_val_mse, result.epochs_run);
    } else if (ev->parsed()) {
      manifest.subcommand = "evaluate";
      manifest.path = sibling_manifest(ev_out);
      ev_common.load();
      manifest.config = {{"predictions_space", ev_pred_space}};
      manifest.inputs = {{"checkpoint", ev_ckpt}, {"data", ev_data}};
      if (!ev_pred.empty()) manifest.inputs["predictions"] = ev_pred;
      const Checkpoint ck = load_checkpoint(ev_ckpt, schema);
      const Dataset data = read_dataset(ev_data, dataset_format(ev_data, ev_format), schema);
      EvalReport report;
      if (ev_pred.empty()) {
        report = evaluate(ck.net, ck.spec, data.inputs, data.outputs, schema, ev_common.threads);
      } else {
        SampleBatch pred = read_table(ev_pred, format_for_path(ev_pred), schema, Role::kOutput);
        if (pred.n_rows() != data.inputs.n_rows()) {
          throw Error(ErrorCode::kRowCountMismatch, "predictions have " + std::to_string(pred.n_rows()) +
                                                        " rows, dataset has " + std::to_string(data.inputs.n_rows()));
        }
        pred = predictions_to_standardized(std::move(pred), ev_pred_space, data.inputs, ck.spec, schema);
        report = evaluate_predictions(pred, ck.spec, data.inputs, data.outputs, schema);
      }
      if (fs::path(ev_out).has_parent_path()) fs::create_directories(fs::path(ev_out).parent_path());
      write_file_atomic(ev_out, report.to_json().dump(2) + "\n");
      manifest.outputs = {{"report", ev_out}};
      std::cout << report.to_table();
    } else if (pr->parsed()) {
      manifest.subcommand = "predict";
      manifest.path = sibling_manifest(pr_out);
      pr_common.load();
      manifest.config = {{"space", pr_space}, {"mass_fix", pr_mass_fix}};
      manifest.inputs = {{"checkpoint", pr_ckpt}, {"inputs", pr_inputs}};
      if (pr_mass_fix && pr_space != "full") {
        throw Error(ErrorCode::kUsage, "--mass-fix requires --space full");
      }
      const Checkpoint ck = load_checkpoint(pr_ckpt, schema);
      const SampleBatch inputs = read_table(pr_inputs, format_for_path(pr_inputs), schema, Role::kInput);
      SampleBatch out = predict_standardized(ck.net, ck.spec, inputs, schema, pr_common.threads);
      if (pr_space != "transformed") out = invert_pipeline(out, ck.spec, schema);
      if (pr_space == "full") out = reconstruct_full_values(inputs, out, schema);
      if (pr_mass_fix) {
        MassFixResult fixed = mass_fix(out, schema);
        std::cerr << "mass fix clamped " << fixed.total_clamped() << " values\n";
        manifest.outputs["clamped"] = fixed.total_clamped();
        out = std::move(fixed.values);
      }
      if (fs::path(pr_out).has_parent_path()) fs::create_directories(fs::path(pr_out).parent_path());
      write_table(pr_out, out, format_for_path(pr_out));
      manifest.outputs["predictions"] = pr_out;
    } else if (bn->parsed()) {
      manifest.subcommand = "bench";
      manifest.path = bn_out.empty() ? sibling_manifest(bn_ckpt + ".bench") : sibling_manifest(bn_out);
      bn_common.load();
      bn_cfg = bench_from_json(bn_common.section("bench"));
      bn_ov.apply();
      const SurrogateConfig surrogate = SurrogateConfig::from_json(bn_common.section("surrogate"));
      manifest.config = {{"bench", bench_to_json(bn_cfg)}, {"surrogate", surrogate.to_json()}};
      manifest.inputs = {{"checkpoint", bn_ckpt}};
      bn_cfg.validate();
      const Checkpoint ck = load_checkpoint(bn_ckpt, schema);
      const BenchResult result = run_bench(ck.net, ck.spec, bn_cfg, surrogate, schema);
      std::cout << result.to_table();
      if (!bn_out.empty()) {
        if (fs::path(bn_out).has_parent_path()) fs::create_directories(fs::path(bn_out).parent_path());
        write_file_atomic(bn_out, result.to_json().dump(2) + "\n");
        manifest.outputs = {{"result", bn_out}};
      }
    } else if (pl->parsed()) {
      manifest.subcommand = "plot";
      manifest.path = fs::path(pl_dir) / "manifest.json";
      pl_common.load();
      pl_opts.write_svg = !pl_no_svg;
      manifest.config = {{"space", pl_space},
                         {"max_points", pl_opts.max_points},
                         {"seed", pl_opts.seed},
                         {"svg", pl_opts.write_svg}};
      manifest.inputs = {{"checkpoint", pl_ckpt}, {"data", pl_data}};
      const Checkpoint ck = load_checkpoint(pl_ckpt, schema);
      const Dataset data = read_dataset(pl_data, dataset_format(pl_data, pl_format), schema);
      const SampleBatch pred_std = predict_standardized(ck.net, ck.spec, data.inputs, schema, pl_common.threads);
      SampleBatch pred, truth;
      const SampleBatch truth_tend = compute_tendencies(data.inputs, data.outputs, schema);
      if (pl_space == "transformed") {
        pred = pred_std;
        truth = apply_pipeline(truth_tend, ck.spec, schema);
      } else if (pl_space == "tendency") {
        pred = invert_pipeline(pred_std, ck.spec, schema);
        truth = truth_tend;
      } else {
        pred = reconstruct_full_values(data.inputs, invert_pipeline(pred_std, ck.spec, schema), schema);
        truth = data.outputs;
      }
      if (pl_vars.empty()) pl_vars = pred.names;
      fs::create_directories(pl_dir);
      json files = json::array();
      for (const auto& v : pl_vars) {
        const auto& p = pred.column(v);
        const auto& t = truth.column(v);
        const ScatterFiles f = export_scatter(p, t, v, fs::path(pl_dir) / sanitize(v), pl_opts);
        files.push_back({{"variable", v}, {"csv", f.csv.string()}, {"svg", f.svg.string()}, {"points", f.n_points}});
      }
      manifest.outputs = {{"files", files}};
      std::cerr << "wrote " << pl_vars.size() << " scatter plots to " << pl_dir << "\n";
    } else if (sc->parsed()) {
      manifest.subcommand = "schema";
      manifest.path = sibling_manifest(sc_out);
      sc_common.load();
      write_file_atomic(sc_out, schema.to_json().dump(2) + "\n");
      manifest.outputs = {{"schema", sc_out}};
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const int rc = exit_code_for(e);
    manifest.write(rc);
    return rc;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [config]: " << e.what() << "\n";
    manifest.write(kExitUsage);
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << "\n";
    manifest.write(kExitData);
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    manifest.write(kExitData);
    return kExitData;
  }
  manifest.write(kExitOk);
  return kExitOk;
}
