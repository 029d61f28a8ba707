// Command-line front end. Everything goes through the shared C API; config
// handling stays on this side so stage functions see one JSON document.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "treatsel.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CStr {
  char* p = nullptr;
  ~CStr() { treatsel_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct DatasetHandle {
  treatsel_dataset* ds = nullptr;
  ~DatasetHandle() { treatsel_dataset_free(ds); }
};

struct PolicyHandle {
  treatsel_policy* p = nullptr;
  ~PolicyHandle() { treatsel_policy_free(p); }
};

struct CliError {
  int code;
};

void require_ok(treatsel_status s, const std::string& stage) {
  if (s == TREATSEL_OK) return;
  std::cerr << "error [" << stage << "]: " << treatsel_last_error() << "\n";
  throw CliError{static_cast<int>(s)};
}

json config_fail(const std::string& msg) {
  std::cerr << "error [config]: " << msg << "\n";
  throw CliError{TREATSEL_CONFIG_ERROR};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_fail("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) config_fail("cannot write " + path.string());
  out << content;
  if (!content.empty() && content.back() != '\n') out << '\n';
}

struct Common {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("--config", c.config_path, "JSON config file");
  if (config_required) opt->required();
  cmd->add_option("--out", c.out_dir, "output directory (default .)");
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--threads", c.threads, "worker threads (stages still run in order)");
}

json load_config(const Common& c) {
  json cfg;
  if (c.config_path.empty()) {
    cfg = json::object();
  } else {
    try {
      cfg = json::parse(read_file(c.config_path));
    } catch (const json::exception& e) {
      config_fail(std::string("config is not valid JSON: ") + e.what());
    }
  }
  if (c.seed) cfg["seed"] = *c.seed;
  return cfg;
}

fs::path out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / name;
}

// Loads the dataset named by the config's data section (or an explicit
// override path), using the schema from the same section.
DatasetHandle load_dataset(const json& cfg, const std::string& data_override) {
  std::string path = data_override;
  json schema = json::object();
  if (cfg.contains("data") && cfg["data"].is_object()) {
    const json& d = cfg["data"];
    if (path.empty()) path = d.value("path", std::string());
    if (d.contains("schema")) schema = d["schema"];
  }
  if (path.empty()) config_fail("no dataset path; set data.path in the config or pass --data");
  DatasetHandle h;
  require_ok(treatsel_dataset_load_csv(path.c_str(), schema.dump().c_str(), &h.ds), "load");
  return h;
}

int run_simulate(const Common& c, bool comparison) {
  json cfg = load_config(c);
  if (comparison) {
    CStr rows, summary, manifest;
    require_ok(treatsel_run_comparison(cfg.dump().c_str(), &rows.p, &summary.p, &manifest.p),
               "comparison");
    write_file(out_path(c, "comparison_rows.csv"), rows.str());
    write_file(out_path(c, "comparison_summary.csv"), summary.str());
    write_file(out_path(c, "comparison_manifest.json"), manifest.str());
    std::cout << "wrote comparison_rows.csv, comparison_summary.csv, comparison_manifest.json\n";
    return 0;
  }
  DatasetHandle h;
  require_ok(treatsel_simulate_dataset(cfg.dump().c_str(), &h.ds), "simulate");
  const fs::path data = out_path(c, "data.csv");
  require_ok(treatsel_dataset_save_csv(h.ds, data.string().c_str()), "save");
  CStr summary;
  require_ok(treatsel_dataset_summary_json(h.ds, &summary.p), "summary");
  write_file(out_path(c, "dataset_summary.json"), summary.str());
  std::cout << summary.str() << "\n";
  return 0;
}

int run_fit(const Common& c, const std::string& data_override) {
  json cfg = load_config(c);
  DatasetHandle ds = load_dataset(cfg, data_override);
  CStr model;
  require_ok(treatsel_fit_effects(ds.ds, cfg.dump().c_str(), &model.p), "fit-effects");
  write_file(out_path(c, "model.json"), model.str());
  std::cout << "wrote model.json\n";
  return 0;
}

int run_merge(const Common& c, const std::string& model_path, const std::string& data_override) {
  json cfg = load_config(c);
  DatasetHandle ds = load_dataset(cfg, data_override);
  const std::string model = read_file(model_path);
  CStr merged;
  require_ok(treatsel_merge_model(model.c_str(), ds.ds, cfg.dump().c_str(), &merged.p), "merge");
  write_file(out_path(c, "model_merged.json"), merged.str());
  std::cout << "wrote model_merged.json\n";
  return 0;
}

int run_optimize(const Common& c, const std::string& model_path, const std::string& data_override) {
  json cfg = load_config(c);
  DatasetHandle ds = load_dataset(cfg, data_override);
  const std::string model = read_file(model_path);
  CStr policy, trace;
  require_ok(treatsel_optimize(model.c_str(), ds.ds, cfg.dump().c_str(), &policy.p, &trace.p),
             "optimize");
  write_file(out_path(c, "policy.json"), policy.str());
  std::cout << "wrote policy.json";
  if (trace.p) {
    write_file(out_path(c, "solver_trace.csv"), trace.str());
    std::cout << ", solver_trace.csv";
  }
  std::cout << "\n";
  return 0;
}

int run_bootstrap(const Common& c, const std::string& model_path, const std::string& policy_path,
                  const std::string& data_override) {
  json cfg = load_config(c);
  DatasetHandle ds = load_dataset(cfg, data_override);
  const std::string model = read_file(model_path);
  const std::string policy = read_file(policy_path);
  CStr corrected, summary;
  require_ok(treatsel_bootstrap(model.c_str(), ds.ds, cfg.dump().c_str(), policy.c_str(),
                                &corrected.p, &summary.p),
             "bootstrap");
  write_file(out_path(c, "policy_corrected.json"), corrected.str());
  write_file(out_path(c, "bootstrap_summary.json"), summary.str());
  std::cout << summary.str() << "\n";
  return 0;
}

int run_evaluate(const Common& c, const std::string& policy_path, const std::string& data_override) {
  json cfg = load_config(c);
  DatasetHandle ds = load_dataset(cfg, data_override);
  const std::string policy = read_file(policy_path);
  CStr result;
  require_ok(treatsel_evaluate_policy(policy.c_str(), ds.ds, &result.p), "evaluate");
  write_file(out_path(c, "evaluation.json"), result.str());
  std::cout << result.str() << "\n";
  return 0;
}

int run_pipeline_cmd(const Common& c, const std::string& data_override) {
  json cfg = load_config(c);
  DatasetHandle ds = load_dataset(cfg, data_override);
  CStr policy, model, report, trace;
  require_ok(
      treatsel_run_pipeline(ds.ds, cfg.dump().c_str(), &policy.p, &model.p, &report.p, &trace.p),
      "pipeline");
  write_file(out_path(c, "policy.json"), policy.str());
  write_file(out_path(c, "model.json"), model.str());
  write_file(out_path(c, "report.json"), report.str());
  std::cout << "wrote policy.json, model.json, report.json";
  if (trace.p) {
    write_file(out_path(c, "solver_trace.csv"), trace.str());
    std::cout << ", solver_trace.csv";
  }
  std::cout << "\n";
  return 0;
}

std::vector<double> parse_features(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      config_fail("bad feature value '" + cell + "'");
    }
  }
  return out;
}

int run_score(const std::string& policy_path, const std::string& features_text,
              const std::string& unit_id, std::optional<std::uint64_t> draw_seed) {
  const std::string text = read_file(policy_path);
  PolicyHandle h;
  require_ok(treatsel_policy_parse(text.c_str(), &h.p), "score");
  if (features_text.empty() && unit_id.empty())
    config_fail("pass --features for cohort policies or --unit for member policies");

  std::vector<double> feats;
  if (!features_text.empty()) feats = parse_features(features_text);

  if (draw_seed) {
    if (feats.empty()) config_fail("--draw needs --features");
    int arm = -1;
    require_ok(treatsel_policy_draw(h.p, feats.data(), static_cast<int>(feats.size()), *draw_seed,
                                    &arm),
               "score");
    std::cout << json{{"arm", arm}}.dump() << "\n";
    return 0;
  }

  std::vector<double> probs(64);
  std::vector<int> arms(64);
  int n_arms = static_cast<int>(arms.size());
  if (!unit_id.empty()) {
    require_ok(treatsel_policy_probs_for_unit(h.p, unit_id.c_str(), probs.data(), arms.data(),
                                              &n_arms),
               "score");
  } else {
    require_ok(treatsel_policy_probs(h.p, feats.data(), static_cast<int>(feats.size()),
                                     probs.data(), arms.data(), &n_arms),
               "score");
  }
  probs.resize(n_arms);
  arms.resize(n_arms);
  std::cout << json{{"arms", arms}, {"probs", probs}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("treatment selection toolkit ") + treatsel_version()};
  app.require_subcommand(1);

  Common sim_c, fit_c, merge_c, opt_c, boot_c, eval_c, pipe_c;
  bool comparison = false;
  std::string fit_data, merge_data, opt_data, boot_data, eval_data, pipe_data;
  std::string merge_model, opt_model, boot_model, boot_policy, eval_policy;
  std::string score_policy, score_features, score_unit;
  std::optional<std::uint64_t> score_draw;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic experiment dataset");
  add_common(sim, sim_c);
  sim->add_flag("--comparison", comparison, "run the multi-method comparison study instead");

  auto* fit = app.add_subcommand("fit-effects", "estimate treatment effects per the config method");
  add_common(fit, fit_c);
  fit->add_option("--data", fit_data, "dataset CSV (overrides data.path)");

  auto* mrg = app.add_subcommand("merge", "merge per-metric cohort models into one partition");
  add_common(mrg, merge_c);
  mrg->add_option("--model", merge_model, "fitted model JSON")->required();
  mrg->add_option("--data", merge_data, "dataset CSV (overrides data.path)");

  auto* opt = app.add_subcommand("optimize", "solve the constrained assignment problem");
  add_common(opt, opt_c);
  opt->add_option("--model", opt_model, "fitted model JSON")->required();
  opt->add_option("--data", opt_data, "dataset CSV (overrides data.path)");

  auto* boot = app.add_subcommand("bootstrap", "bias-correct a policy by parametric resampling");
  add_common(boot, boot_c);
  boot->add_option("--model", boot_model, "fitted model JSON")->required();
  boot->add_option("--policy", boot_policy, "policy JSON to correct")->required();
  boot->add_option("--data", boot_data, "dataset CSV (overrides data.path)");

  auto* ev = app.add_subcommand("evaluate", "score a policy against counterfactual outcomes");
  add_common(ev, eval_c);
  ev->add_option("--policy", eval_policy, "policy JSON")->required();
  ev->add_option("--data", eval_data, "dataset CSV (overrides data.path)");

  auto* pipe = app.add_subcommand("pipeline", "estimate, merge, optimize, and bias-correct");
  add_common(pipe, pipe_c);
  pipe->add_option("--data", pipe_data, "dataset CSV (overrides data.path)");

  auto* sc = app.add_subcommand("score", "look up or draw an assignment from a policy file");
  sc->add_option("--policy", score_policy, "policy JSON")->required();
  sc->add_option("--features", score_features, "comma-separated feature vector");
  sc->add_option("--unit", score_unit, "unit id (member-level policies)");
  sc->add_option("--draw", score_draw, "seed for a categorical draw");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : TREATSEL_CONFIG_ERROR;
  }

  try {
    if (sim->parsed()) return run_simulate(sim_c, comparison);
    if (fit->parsed()) return run_fit(fit_c, fit_data);
    if (mrg->parsed()) return run_merge(merge_c, merge_model, merge_data);
    if (opt->parsed()) return run_optimize(opt_c, opt_model, opt_data);
    if (boot->parsed()) return run_bootstrap(boot_c, boot_model, boot_policy, boot_data);
    if (ev->parsed()) return run_evaluate(eval_c, eval_policy, eval_data);
    if (pipe->parsed()) return run_pipeline_cmd(pipe_c, pipe_data);
    if (sc->parsed()) return run_score(score_policy, score_features, score_unit, score_draw);
  } catch (const CliError& e) {
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return TREATSEL_INTERNAL;
  }
  return 0;
}
