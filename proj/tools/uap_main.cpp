// Command-line front end: attack, evaluate, baseline, sweep.
//
// Exit codes: 0 success, 2 configuration error, 3 oracle error, 4 I/O error.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uap/attack.hpp"
#include "uap/dataio.hpp"
#include "uap/metrics.hpp"
#include "uap/oracle.hpp"
#include "uap/remote.hpp"
#include "uap/rng.hpp"
#include "uap/tensor.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string manifest;
  std::string oracle_model;
  std::string oracle_url;
  std::string mode = "nontargeted";
  std::string target;  // class index or class name
  double epsilon = 0.5;
  std::optional<double> zeta;
  std::optional<double> xi;
  std::string norm = "2";
  double fd = 28.0 / 299.0;
  int max_iters = 5000;
  std::uint64_t seed = 1;
  bool clip = true;
  std::string directions = "dct";
  bool without_replacement = false;
  std::optional<int> sample_per_class;
  std::optional<int> sample_total;
  std::string uap_path;
  std::string out_uap;
  std::string out_trace;
  std::string out_metrics;
  std::string out_csv;
  int trials = 10;
  std::vector<int> sizes;
  int validation_size = 0;
};

struct Loaded {
  uap::Dataset dataset;
  std::vector<int> input_indices;
  std::vector<int> heldout_indices;
  std::vector<uap::ImageTensor> input_images;
  std::vector<int> input_labels;
  std::vector<uap::ImageTensor> heldout_images;
  std::vector<int> heldout_labels;
  std::unique_ptr<uap::ScoreOracle> oracle;
};

Loaded load_common(const Options& o) {
  Loaded L;
  try {
    L.dataset = uap::load_dataset(o.manifest);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
  if (L.dataset.images.empty()) throw ConfigError("empty dataset");

  if (o.sample_per_class && o.sample_total) {
    throw ConfigError(
        "exactly one of --sample-per-class and --sample-total may be given");
  }
  if (o.sample_per_class || o.sample_total) {
    uap::SampleSplit split;
    try {
      split = uap::stratified_sample(L.dataset, o.sample_per_class,
                                     o.sample_total, o.seed);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    L.input_indices = split.sample;
    L.heldout_indices = split.remainder;
  } else {
    L.input_indices.resize(L.dataset.images.size());
    std::iota(L.input_indices.begin(), L.input_indices.end(), 0);
  }
  L.input_images = uap::select_images(L.dataset.images, L.input_indices);
  L.input_labels = uap::select_labels(L.dataset.labels, L.input_indices);
  L.heldout_images = uap::select_images(L.dataset.images, L.heldout_indices);
  L.heldout_labels = uap::select_labels(L.dataset.labels, L.heldout_indices);

  const bool has_model = !o.oracle_model.empty();
  const bool has_url = !o.oracle_url.empty();
  if (has_model == has_url) {
    throw ConfigError(
        "exactly one of --oracle-model and --oracle-url is required");
  }
  try {
    if (has_model) {
      L.oracle = uap::load_model(o.oracle_model);
    } else {
      L.oracle = std::make_unique<uap::RemoteOracle>(o.oracle_url,
                                                     L.dataset.shape);
    }
  } catch (const std::exception& e) {
    throw OracleError(e.what());
  }
  if (!(L.oracle->input_shape() == L.dataset.shape)) {
    throw ConfigError("shape mismatch: oracle expects " +
                      uap::to_string(L.oracle->input_shape()) +
                      ", dataset is " + uap::to_string(L.dataset.shape));
  }
  return L;
}

int resolve_target(const uap::Dataset& ds, const std::string& s) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec == std::errc() && ptr == s.data() + s.size()) return value;
  const auto it = std::find(ds.class_names.begin(), ds.class_names.end(), s);
  if (it == ds.class_names.end()) throw ConfigError("unknown class: " + s);
  return static_cast<int>(it - ds.class_names.begin());
}

// Exactly one of --zeta / --xi picks the budget; zeta scales the mean norm
// of the images the attack actually sees.
double resolve_xi(const Options& o,
                  const std::vector<uap::ImageTensor>& images, uap::Norm p) {
  if (o.zeta.has_value() == o.xi.has_value()) {
    throw ConfigError("exactly one of --zeta and --xi is required");
  }
  if (o.xi) return *o.xi;
  try {
    return uap::xi_from_zeta(*o.zeta, images, p);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

uap::AttackConfig build_attack_config(const Options& o, const Loaded& L,
                                      double xi) {
  uap::AttackConfig cfg;
  try {
    cfg.mode = uap::attack_mode_from_string(o.mode);
    if (cfg.mode == uap::AttackMode::Targeted) {
      if (o.target.empty()) {
        throw ConfigError("--target is required with --mode targeted");
      }
      cfg.target_class = resolve_target(L.dataset, o.target);
    }
    cfg.epsilon = o.epsilon;
    cfg.xi = xi;
    cfg.norm = uap::norm_from_string(o.norm);
    cfg.max_iterations = o.max_iters;
    cfg.directions = uap::direction_kind_from_string(o.directions);
    cfg.freq_fraction = o.fd;
    cfg.sample_without_replacement = o.without_replacement;
    cfg.seed = o.seed;
    cfg.clip = o.clip;
    cfg.validate(L.oracle->num_classes());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << content;
  if (!out) throw IoError("cannot write file: " + path.string());
}

// Every run records its fully-resolved configuration next to the primary
// output so the result is reproducible from the artifacts alone.
void write_run_json(const std::string& primary_output, json config) {
  fs::path dir = primary_output.empty()
                     ? fs::current_path()
                     : fs::path(primary_output).parent_path();
  if (dir.empty()) dir = fs::current_path();
  write_text(dir / "run.json", config.dump(2) + "\n");
}

json base_run_config(const Options& o, const std::string& subcommand,
                     const Loaded& L) {
  json j;
  j["subcommand"] = subcommand;
  j["manifest"] = o.manifest;
  j["oracle_model"] = o.oracle_model.empty() ? json() : json(o.oracle_model);
  j["oracle_url"] = o.oracle_url.empty() ? json() : json(o.oracle_url);
  j["seed"] = o.seed;
  j["clip"] = o.clip;
  j["sample_per_class"] =
      o.sample_per_class ? json(*o.sample_per_class) : json();
  j["sample_total"] = o.sample_total ? json(*o.sample_total) : json();
  j["num_images"] = L.dataset.images.size();
  j["num_input_images"] = L.input_images.size();
  j["num_heldout_images"] = L.heldout_images.size();
  j["num_classes"] = L.oracle->num_classes();
  j["shape"] = {L.dataset.shape.height, L.dataset.shape.width,
                L.dataset.shape.channels};
  j["class_names"] = L.dataset.class_names;
  return j;
}

void add_attack_params(json& j, const Options& o,
                       const uap::AttackConfig& cfg) {
  j["mode"] = uap::attack_mode_to_string(cfg.mode);
  j["target"] = cfg.target_class;
  j["epsilon"] = cfg.epsilon;
  j["zeta"] = o.zeta ? json(*o.zeta) : json();
  j["xi"] = cfg.xi;
  j["norm"] = uap::norm_to_string(cfg.norm);
  j["fd"] = cfg.freq_fraction;
  j["max_iters"] = cfg.max_iterations;
  j["directions"] = uap::direction_kind_to_string(cfg.directions);
  j["without_replacement"] = cfg.sample_without_replacement;
}

json metrics_for_set(uap::ScoreOracle& oracle,
                     const std::vector<uap::ImageTensor>& images,
                     const std::vector<int>& labels,
                     const uap::Perturbation& delta, uap::AttackMode mode,
                     int target, bool clip) {
  const std::uint64_t before = oracle.query_count();
  json j;
  j["r_f"] = uap::fooling_rate(oracle, images, delta, clip);
  if (mode == uap::AttackMode::Targeted) {
    const uap::Perturbation zero =
        uap::Perturbation::zeros(delta.shape, delta.norm_type, 0.0);
    j["r_s"] = uap::targeted_success_rate(oracle, images, delta, target, clip);
    j["baseline_r_s"] =
        uap::targeted_success_rate(oracle, images, zero, target, clip);
  } else {
    j["r_s"] = json();
    j["baseline_r_s"] = json();
  }
  const uap::ConfusionMatrix cm =
      uap::confusion_matrix(oracle, images, labels, delta, clip);
  j["confusion"] = cm.normalized;
  j["queries"] = oracle.query_count() - before;
  return j;
}

void emit_metrics(const Options& o, const json& metrics) {
  const std::string text = metrics.dump(2) + "\n";
  if (o.out_metrics.empty()) {
    std::cout << text;
  } else {
    write_text(o.out_metrics, text);
  }
}

int cmd_attack(const Options& o) {
  Loaded L = load_common(o);
  uap::AttackConfig cfg;
  {
    const uap::Norm p = [&] {
      try {
        return uap::norm_from_string(o.norm);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }();
    cfg = build_attack_config(o, L, resolve_xi(o, L.input_images, p));
  }

  json run = base_run_config(o, "attack", L);
  add_attack_params(run, o, cfg);
  run["out_uap"] = o.out_uap;
  run["out_trace"] = o.out_trace.empty() ? json() : json(o.out_trace);
  run["out_metrics"] = o.out_metrics.empty() ? json() : json(o.out_metrics);
  write_run_json(o.out_uap, run);

  std::ofstream trace_out;
  if (!o.out_trace.empty()) {
    trace_out.open(o.out_trace, std::ios::binary);
    if (!trace_out) throw IoError("cannot write file: " + o.out_trace);
    trace_out << uap::kTraceCsvHeader << "\n";
  }
  const uap::TraceSink sink = [&](const uap::TraceRow& row) {
    if (trace_out.is_open()) {
      trace_out << uap::format_trace_row(row) << "\n";
    }
    if (row.iteration % 100 == 0) {
      std::cerr << "iter=" << row.iteration << " r=" << row.success_rate
                << " obj=" << row.objective << " queries=" << row.queries
                << "\n";
    }
  };

  uap::AttackReport report;
  try {
    report = uap::run_attack(*L.oracle, L.input_images, cfg, sink);
  } catch (const uap::AttackAborted& e) {
    trace_out.flush();  // keep the partial trace
    throw OracleError(e.what());
  }
  if (trace_out.is_open()) {
    trace_out.flush();
    if (!trace_out) throw IoError("cannot write file: " + o.out_trace);
  }
  std::cerr << "finished: reason=" << uap::stop_reason_to_string(report.reason)
            << " iterations=" << report.iterations
            << " accepted=" << report.accepted_updates
            << " r=" << report.final_success_rate
            << " queries=" << report.queries << "\n";

  uap::UapMeta meta;
  meta.p = cfg.norm;
  meta.xi = cfg.xi;
  meta.mode = cfg.mode;
  meta.target = cfg.target_class;
  meta.seed = cfg.seed;
  meta.queries = report.queries;
  try {
    uap::save_uap(o.out_uap, report.uap, meta);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }

  json metrics;
  try {
    metrics = metrics_for_set(*L.oracle, L.input_images, L.input_labels,
                              report.uap, cfg.mode, cfg.target_class, cfg.clip);
    metrics["heldout"] =
        L.heldout_images.empty()
            ? json()
            : metrics_for_set(*L.oracle, L.heldout_images, L.heldout_labels,
                              report.uap, cfg.mode, cfg.target_class, cfg.clip);
  } catch (const std::exception& e) {
    throw OracleError(e.what());
  }
  metrics["attack_queries"] = report.queries;
  metrics["stop_reason"] = uap::stop_reason_to_string(report.reason);
  emit_metrics(o, metrics);
  return 0;
}

int cmd_evaluate(const Options& o) {
  Loaded L = load_common(o);
  uap::Perturbation delta;
  uap::UapMeta meta;
  try {
    std::tie(delta, meta) = uap::load_uap(o.uap_path);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
  if (!(delta.shape == L.dataset.shape)) {
    throw ConfigError("shape mismatch: perturbation is " +
                      uap::to_string(delta.shape) + ", dataset is " +
                      uap::to_string(L.dataset.shape));
  }
  if (meta.mode == uap::AttackMode::Targeted &&
      (meta.target < 0 || meta.target >= L.oracle->num_classes())) {
    throw ConfigError("unknown class: " + std::to_string(meta.target));
  }

  json run = base_run_config(o, "evaluate", L);
  run["uap"] = o.uap_path;
  run["uap_mode"] = uap::attack_mode_to_string(meta.mode);
  run["uap_target"] = meta.target;
  run["uap_norm"] = uap::norm_to_string(meta.p);
  run["uap_xi"] = meta.xi;
  run["out_metrics"] = o.out_metrics.empty() ? json() : json(o.out_metrics);
  write_run_json(o.out_metrics, run);

  json metrics;
  try {
    metrics = metrics_for_set(*L.oracle, L.input_images, L.input_labels, delta,
                              meta.mode, meta.target, o.clip);
  } catch (const std::exception& e) {
    throw OracleError(e.what());
  }
  emit_metrics(o, metrics);
  return 0;
}

int cmd_baseline(const Options& o) {
  Loaded L = load_common(o);
  if (o.trials < 1) throw ConfigError("invalid trials");
  uap::Norm p;
  uap::AttackMode mode;
  int target = -1;
  try {
    p = uap::norm_from_string(o.norm);
    mode = uap::attack_mode_from_string(o.mode);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (mode == uap::AttackMode::Targeted) {
    if (o.target.empty()) {
      throw ConfigError("--target is required with --mode targeted");
    }
    target = resolve_target(L.dataset, o.target);
    if (target < 0 || target >= L.oracle->num_classes()) {
      throw ConfigError("unknown class: " + o.target);
    }
  }
  const double xi = resolve_xi(o, L.input_images, p);
  if (xi <= 0) throw ConfigError("invalid radius");

  json run = base_run_config(o, "baseline", L);
  run["mode"] = uap::attack_mode_to_string(mode);
  run["target"] = target;
  run["zeta"] = o.zeta ? json(*o.zeta) : json();
  run["xi"] = xi;
  run["norm"] = uap::norm_to_string(p);
  run["trials"] = o.trials;
  run["out_metrics"] = o.out_metrics.empty() ? json() : json(o.out_metrics);
  write_run_json(o.out_metrics, run);

  const std::uint64_t before = L.oracle->query_count();
  std::vector<double> rates;
  try {
    for (int t = 0; t < o.trials; ++t) {
      const uap::Perturbation trial =
          uap::random_uap(L.dataset.shape, p, xi,
                          uap::Rng::derive(o.seed, static_cast<std::uint64_t>(t)));
      const double rate =
          mode == uap::AttackMode::Targeted
              ? uap::targeted_success_rate(*L.oracle, L.input_images, trial,
                                           target, o.clip)
              : uap::fooling_rate(*L.oracle, L.input_images, trial, o.clip);
      rates.push_back(rate);
      std::cerr << "trial=" << t << " rate=" << rate << "\n";
    }
  } catch (const std::exception& e) {
    throw OracleError(e.what());
  }

  double sum = 0;
  for (double r : rates) sum += r;
  json metrics;
  metrics["metric"] = mode == uap::AttackMode::Targeted ? "r_s" : "r_f";
  metrics["trials"] = o.trials;
  metrics["xi"] = xi;
  metrics["norm"] = uap::norm_to_string(p);
  metrics["rates"] = rates;
  metrics["mean"] = sum / static_cast<double>(rates.size());
  metrics["min"] = *std::min_element(rates.begin(), rates.end());
  metrics["max"] = *std::max_element(rates.begin(), rates.end());
  metrics["queries"] = L.oracle->query_count() - before;
  emit_metrics(o, metrics);
  return 0;
}

int cmd_sweep(const Options& o) {
  Loaded L = load_common(o);
  if (o.sizes.empty()) throw ConfigError("--sizes is required");
  if (o.validation_size < 1) throw ConfigError("invalid validation size");

  uap::AttackConfig cfg;
  {
    const uap::Norm p = [&] {
      try {
        return uap::norm_from_string(o.norm);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }();
    // The sweep draws its own input sets, so zeta resolves against the pool.
    cfg = build_attack_config(o, L, resolve_xi(o, L.dataset.images, p));
  }

  json run = base_run_config(o, "sweep", L);
  add_attack_params(run, o, cfg);
  run["sizes"] = o.sizes;
  run["validation_size"] = o.validation_size;
  run["out_csv"] = o.out_csv.empty() ? json() : json(o.out_csv);
  write_run_json(o.out_csv, run);

  std::vector<uap::SweepRow> rows;
  try {
    rows = uap::size_sweep(*L.oracle, L.dataset.images, o.sizes,
                           o.validation_size, o.seed, cfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const uap::AttackAborted& e) {
    throw OracleError(e.what());
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  std::string csv = "n,r_f_input,r_f_validation\n";
  char buf[96];
  for (const uap::SweepRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", r.n, r.rf_input,
                  r.rf_validation);
    csv += buf;
  }
  if (o.out_csv.empty()) {
    std::cout << csv;
  } else {
    write_text(o.out_csv, csv);
  }
  return 0;
}

void add_dataset_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--manifest", o.manifest, "Dataset manifest CSV (path,label)")
      ->required();
  cmd->add_option("--oracle-model", o.oracle_model,
                  "Local model file for the oracle");
  cmd->add_option("--oracle-url", o.oracle_url,
                  "Remote oracle endpoint, e.g. http://host:port");
  cmd->add_option("--sample-per-class", o.sample_per_class,
                  "Sample this many images from every class");
  cmd->add_option("--sample-total", o.sample_total,
                  "Sample this many images overall");
  cmd->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
  cmd->add_flag("--clip,!--no-clip", o.clip,
                "Clip perturbed images to [0,1] (default on)");
}

void add_budget_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--zeta", o.zeta,
                  "Budget as a fraction of the mean image Lp norm");
  cmd->add_option("--xi", o.xi, "Absolute Lp budget");
  cmd->add_option("--norm", o.norm, "Lp norm: 1, 2, or inf")
      ->capture_default_str();
}

void add_attack_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--mode", o.mode, "nontargeted or targeted")
      ->capture_default_str();
  cmd->add_option("--target", o.target,
                  "Target class (index or name) for targeted mode");
  cmd->add_option("--epsilon", o.epsilon, "Step size")->capture_default_str();
  cmd->add_option("--fd", o.fd, "Frequency fraction for DCT directions")
      ->capture_default_str();
  cmd->add_option("--max-iters", o.max_iters, "Iteration cap")
      ->capture_default_str();
  cmd->add_option("--directions", o.directions, "pixel or dct")
      ->capture_default_str();
  cmd->add_flag("--without-replacement", o.without_replacement,
                "Cycle directions in seeded permutations instead of "
                "independent draws");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Universal adversarial perturbations against score-based "
               "black-box classifiers"};
  app.require_subcommand(1);
  Options o;

  CLI::App* attack =
      app.add_subcommand("attack", "Search for a universal perturbation");
  add_dataset_flags(attack, o);
  add_budget_flags(attack, o);
  add_attack_flags(attack, o);
  attack->add_option("--out-uap", o.out_uap, "Output perturbation file")
      ->required();
  attack->add_option("--out-trace", o.out_trace, "Per-iteration trace CSV");
  attack->add_option("--out-metrics", o.out_metrics,
                     "Metrics JSON (stdout when omitted)");

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Evaluate a saved perturbation");
  add_dataset_flags(evaluate, o);
  evaluate->add_option("--uap", o.uap_path, "Perturbation file to evaluate")
      ->required();
  evaluate->add_option("--out-metrics", o.out_metrics,
                       "Metrics JSON (stdout when omitted)");

  CLI::App* baseline = app.add_subcommand(
      "baseline", "Evaluate random perturbations at the same budget");
  add_dataset_flags(baseline, o);
  add_budget_flags(baseline, o);
  baseline->add_option("--mode", o.mode, "nontargeted or targeted")
      ->capture_default_str();
  baseline->add_option("--target", o.target,
                       "Target class (index or name) for targeted mode");
  baseline->add_option("--trials", o.trials, "Number of random perturbations")
      ->capture_default_str();
  baseline->add_option("--out-metrics", o.out_metrics,
                       "Metrics JSON (stdout when omitted)");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Attack at several input-set sizes and compare fooling rates");
  add_dataset_flags(sweep, o);
  add_budget_flags(sweep, o);
  add_attack_flags(sweep, o);
  sweep->add_option("--sizes", o.sizes, "Input-set sizes, e.g. 10,50,100")
      ->delimiter(',')
      ->required();
  sweep->add_option("--validation-size", o.validation_size,
                    "Held-out validation set size (same for every N)")
      ->required();
  sweep->add_option("--out-csv", o.out_csv, "Sweep table CSV (stdout when "
                    "omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (attack->parsed()) return cmd_attack(o);
    if (evaluate->parsed()) return cmd_evaluate(o);
    if (baseline->parsed()) return cmd_baseline(o);
    return cmd_sweep(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const OracleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
