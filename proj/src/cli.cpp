#include "reactor/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "reactor/dataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace reactor {

std::vector<Scenario> canonical_scenarios(std::uint64_t base_seed) {
  std::vector<Scenario> v(6);
  v[0].name = "train";
  v[0].rng_seed = base_seed;
  v[1].name = "test1";  // identical conditions, fresh inlet walk
  v[1].rng_seed = base_seed + 1;
  v[2].name = "test2";
  v[2].rng_seed = base_seed;
  v[2].mult_T = 1.07;
  v[3].name = "test3";
  v[3].rng_seed = base_seed;
  v[3].mult_xa = 1.20;
  v[4].name = "test4";
  v[4].rng_seed = base_seed;
  v[4].mult_xp = 0.85;
  v[5].name = "test5";  // the three changes combined
  v[5].rng_seed = base_seed;
  v[5].mult_T = 1.07;
  v[5].mult_xa = 1.20;
  v[5].mult_xp = 0.85;
  return v;
}

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw ConfigError("config field '" + field + "': " + why);
}

template <typename T>
T get_as(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    bad_field(field, e.what());
  }
}

std::vector<std::size_t> levels_from(const json& j, const std::string& field) {
  std::vector<std::size_t> out;
  if (!j.is_array()) bad_field(field, "expected an array of level indices");
  for (const json& e : j) out.push_back(get_as<std::size_t>(e, field));
  return out;
}

void parse_scenarios(const json& j, RunConfig& cfg) {
  if (!j.is_array()) bad_field("scenarios", "expected an array");
  for (const json& e : j) {
    Scenario sc;
    sc.name = get_as<std::string>(e.at("name"), "scenarios.name");
    if (e.contains("seed"))
      sc.rng_seed = get_as<std::uint64_t>(e["seed"], "scenarios.seed");
    if (e.contains("mult_T"))
      sc.mult_T = get_as<double>(e["mult_T"], "scenarios.mult_T");
    if (e.contains("mult_xa"))
      sc.mult_xa = get_as<double>(e["mult_xa"], "scenarios.mult_xa");
    if (e.contains("mult_xp"))
      sc.mult_xp = get_as<double>(e["mult_xp"], "scenarios.mult_xp");
    if (e.contains("walk")) sc.walk = get_as<bool>(e["walk"], "scenarios.walk");
    cfg.scenarios.push_back(sc);
  }
}

void parse_schedule(const json& j, RunConfig& cfg) {
  cfg.has_schedule = true;
  cfg.schedule.phases.clear();
  if (!j.contains("phases") || !j["phases"].is_array())
    bad_field("schedule.phases", "expected an array of {iterations, lr}");
  for (const json& e : j["phases"]) {
    TrainPhase p;
    p.iterations =
        get_as<std::size_t>(e.at("iterations"), "schedule.phases.iterations");
    p.lr = get_as<double>(e.at("lr"), "schedule.phases.lr");
    cfg.schedule.phases.push_back(p);
  }
  if (j.contains("sensor_shift"))
    cfg.schedule.sensor_shift =
        get_as<bool>(j["sensor_shift"], "schedule.sensor_shift");
  if (j.contains("gaussian_noise"))
    cfg.schedule.gaussian_noise =
        get_as<bool>(j["gaussian_noise"], "schedule.gaussian_noise");
  if (j.contains("shift_prob"))
    cfg.schedule.shift_prob =
        get_as<double>(j["shift_prob"], "schedule.shift_prob");
  if (j.contains("noise_factor"))
    cfg.schedule.noise_factor =
        get_as<double>(j["noise_factor"], "schedule.noise_factor");
}

void parse_loss(const json& j, RunConfig& cfg) {
  cfg.has_loss = true;
  if (j.contains("lambda_a"))
    cfg.loss.lambda_a = get_as<double>(j["lambda_a"], "loss.lambda_a");
  if (j.contains("lambda_p"))
    cfg.loss.lambda_p = get_as<double>(j["lambda_p"], "loss.lambda_p");
  if (j.contains("t_prime"))
    cfg.loss.t_prime = get_as<std::size_t>(j["t_prime"], "loss.t_prime");
  if (j.contains("enable_C1"))
    cfg.loss.enable_C1 = get_as<bool>(j["enable_C1"], "loss.enable_C1");
  if (j.contains("enable_C2"))
    cfg.loss.enable_C2 = get_as<bool>(j["enable_C2"], "loss.enable_C2");
}

void parse_cases(const json& j, RunConfig& cfg) {
  if (!j.is_array()) bad_field("sensitivity", "expected an array");
  for (const json& e : j) {
    SensitivityCase c;
    c.name = get_as<std::string>(e.at("name"), "sensitivity.name");
    if (e.contains("mult_T"))
      c.mult_T = get_as<double>(e["mult_T"], "sensitivity.mult_T");
    if (e.contains("mult_xa"))
      c.mult_xa = get_as<double>(e["mult_xa"], "sensitivity.mult_xa");
    if (e.contains("mult_xp"))
      c.mult_xp = get_as<double>(e["mult_xp"], "sensitivity.mult_xp");
    cfg.cases.push_back(c);
  }
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  static const char* known[] = {
      "out_dir",     "params_path", "grid",       "scenarios",
      "dataset_dir", "dataset",     "variant",    "seeds",
      "gru_hidden",  "layout",      "schedule",   "loss",
      "checkpoint",  "checkpoints", "tests",      "sensitivity"};
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config field '" + key + "'");
  }

  RunConfig cfg;
  if (j.contains("out_dir"))
    cfg.out_dir = get_as<std::string>(j["out_dir"], "out_dir");
  if (j.contains("params_path"))
    cfg.params_path = get_as<std::string>(j["params_path"], "params_path");
  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (g.contains("n_z")) cfg.n_z = get_as<std::size_t>(g["n_z"], "grid.n_z");
    if (g.contains("n_t")) cfg.n_t = get_as<std::size_t>(g["n_t"], "grid.n_t");
  }
  if (j.contains("scenarios")) parse_scenarios(j["scenarios"], cfg);
  if (j.contains("dataset_dir"))
    cfg.dataset_dir = get_as<std::string>(j["dataset_dir"], "dataset_dir");
  if (j.contains("dataset"))
    cfg.dataset = get_as<std::string>(j["dataset"], "dataset");
  if (j.contains("variant")) {
    cfg.variant = get_as<std::string>(j["variant"], "variant");
    parse_variant(cfg.variant);  // fail fast on unknown names
  }
  if (j.contains("seeds")) {
    cfg.seeds.clear();
    for (const json& e : j["seeds"])
      cfg.seeds.push_back(get_as<std::uint64_t>(e, "seeds"));
    if (cfg.seeds.empty()) bad_field("seeds", "must not be empty");
  }
  if (j.contains("gru_hidden"))
    cfg.gru_hidden = get_as<std::size_t>(j["gru_hidden"], "gru_hidden");
  if (j.contains("layout")) {
    const json& l = j["layout"];
    if (l.is_string()) {
      cfg.layout = l.get<std::string>();
      if (cfg.layout != "default" && cfg.layout != "real")
        bad_field("layout", "expected \"default\", \"real\" or an object");
    } else if (l.is_object()) {
      cfg.layout = "explicit";
      cfg.explicit_layout.name = "explicit";
      cfg.explicit_layout.train_levels =
          levels_from(l.at("train"), "layout.train");
      if (l.contains("val1"))
        cfg.explicit_layout.val1_levels = levels_from(l["val1"], "layout.val1");
      if (l.contains("val2"))
        cfg.explicit_layout.val2_levels = levels_from(l["val2"], "layout.val2");
    } else {
      bad_field("layout", "expected a string or an object");
    }
  }
  if (j.contains("schedule")) parse_schedule(j["schedule"], cfg);
  if (j.contains("loss")) parse_loss(j["loss"], cfg);
  if (j.contains("checkpoint"))
    cfg.checkpoint = get_as<std::string>(j["checkpoint"], "checkpoint");
  if (j.contains("checkpoints")) {
    cfg.checkpoints.clear();
    for (const json& e : j["checkpoints"])
      cfg.checkpoints.push_back(get_as<std::string>(e, "checkpoints"));
  }
  if (j.contains("tests")) {
    cfg.tests.clear();
    for (const json& e : j["tests"])
      cfg.tests.push_back(get_as<std::string>(e, "tests"));
  }
  if (j.contains("sensitivity")) parse_cases(j["sensitivity"], cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  if (!fs::exists(path))
    throw MissingArtifact("no such config file: '" + path + "'");
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string canonical_config(const RunConfig& cfg) {
  ordered_json j;
  j["out_dir"] = cfg.out_dir;
  j["params_path"] = cfg.params_path;
  j["grid"] = {{"n_z", cfg.n_z}, {"n_t", cfg.n_t}};
  ordered_json scen = ordered_json::array();
  for (const Scenario& s :
       cfg.scenarios.empty() ? canonical_scenarios() : cfg.scenarios) {
    ordered_json e;
    e["name"] = s.name;
    e["seed"] = s.rng_seed;
    e["mult_T"] = s.mult_T;
    e["mult_xa"] = s.mult_xa;
    e["mult_xp"] = s.mult_xp;
    e["walk"] = s.walk;
    scen.push_back(std::move(e));
  }
  j["scenarios"] = std::move(scen);
  j["dataset_dir"] = cfg.dataset_dir;
  j["dataset"] = cfg.dataset;
  j["variant"] = cfg.variant;
  j["seeds"] = cfg.seeds;
  j["gru_hidden"] = cfg.gru_hidden;
  if (cfg.layout == "explicit") {
    ordered_json l;
    l["train"] = cfg.explicit_layout.train_levels;
    l["val1"] = cfg.explicit_layout.val1_levels;
    l["val2"] = cfg.explicit_layout.val2_levels;
    j["layout"] = std::move(l);
  } else {
    j["layout"] = cfg.layout;
  }
  {
    const ModelVariant v = parse_variant(cfg.variant);
    const TrainSchedule& s =
        cfg.has_schedule ? cfg.schedule : default_schedule(v);
    ordered_json e;
    ordered_json phases = ordered_json::array();
    for (const TrainPhase& p : s.phases)
      phases.push_back({{"iterations", p.iterations}, {"lr", p.lr}});
    e["phases"] = std::move(phases);
    e["sensor_shift"] = s.sensor_shift;
    e["gaussian_noise"] = s.gaussian_noise;
    e["shift_prob"] = s.shift_prob;
    e["noise_factor"] = s.noise_factor;
    j["schedule"] = std::move(e);

    const LossConfig& c = cfg.has_loss ? cfg.loss : default_loss_config(v);
    ordered_json lc;
    lc["lambda_a"] = c.lambda_a;
    lc["lambda_p"] = c.lambda_p;
    lc["t_prime"] = c.t_prime;
    lc["enable_C1"] = c.enable_C1;
    lc["enable_C2"] = c.enable_C2;
    j["loss"] = std::move(lc);
  }
  j["checkpoint"] = cfg.checkpoint;
  j["checkpoints"] = cfg.checkpoints;
  j["tests"] = cfg.tests;
  ordered_json cases = ordered_json::array();
  for (const SensitivityCase& c :
       cfg.cases.empty() ? default_sensitivity_cases() : cfg.cases) {
    ordered_json e;
    e["name"] = c.name;
    e["mult_T"] = c.mult_T;
    e["mult_xa"] = c.mult_xa;
    e["mult_xp"] = c.mult_xp;
    cases.push_back(std::move(e));
  }
  j["sensitivity"] = std::move(cases);
  return j.dump(2) + "\n";
}

ReactorParams load_params(const std::string& path) {
  ReactorParams p;
  if (path.empty()) return p;
  if (!fs::exists(path))
    throw MissingArtifact("no such parameter file: '" + path + "'");
  std::ifstream in(path, std::ios::binary);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  std::map<std::string, double*> fields = {
      {"U", &p.U},         {"k0", &p.k0},           {"K0", &p.K0},
      {"Q", &p.Q},         {"E", &p.E},             {"R", &p.R},
      {"l1", &p.l1},       {"l2", &p.l2},           {"P", &p.P},
      {"x_h", &p.x_h},     {"E_d", &p.E_d},         {"k_d0", &p.k_d0},
      {"C_d", &p.C_d},     {"gamma", &p.gamma},     {"alpha_c", &p.alpha_c},
      {"beta_c", &p.beta_c}, {"L", &p.L}};
  for (const auto& [key, value] : j.items()) {
    auto it = fields.find(key);
    if (it == fields.end())
      throw ConfigError("unknown reactor constant '" + key + "' in '" + path +
                        "'");
    *it->second = get_as<double>(value, key);
  }
  validate_params(p);
  return p;
}

SensorLayout layout_from_config(const RunConfig& cfg, std::size_t n_z) {
  if (cfg.layout == "default") return make_default_layout(n_z);
  if (cfg.layout == "real") return make_real_layout();
  SensorLayout l = cfg.explicit_layout;
  for (const std::vector<std::size_t>* set :
       {&l.train_levels, &l.val1_levels, &l.val2_levels})
    for (std::size_t lev : *set)
      if (lev >= n_z)
        throw ConfigError("layout level " + std::to_string(lev) +
                          " is outside the grid (n_z = " +
                          std::to_string(n_z) + ")");
  return l;
}

namespace {

fs::path out_root(const RunConfig& cfg) {
  fs::path root(cfg.out_dir);
  fs::create_directories(root);
  return root;
}

CycleData load_cycle(const RunConfig& cfg, const std::string& name) {
  if (cfg.dataset_dir.empty())
    throw ConfigError("this command needs 'dataset_dir' in the config");
  return read_cycle_csv((fs::path(cfg.dataset_dir) / name / "data.csv")
                            .string());
}

GridModel load_model(const std::string& path) {
  if (path.empty())
    throw ConfigError("this command needs 'checkpoint' in the config");
  return model_from_checkpoint(load_checkpoint(path));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << text;
}

// temperature predictions of the sequence baseline, placed at its sensor
// levels; all other grid entries stay zero and are never evaluated
StateField sequence_T(const GridModel& m, const Grid& g,
                      const SensorLayout& layout) {
  if (m.gru.out != layout.train_levels.size())
    throw ConfigError(
        "checkpointed sequence baseline predicts " +
        std::to_string(m.gru.out) + " sensors but the layout has " +
        std::to_string(layout.train_levels.size()));
  ad::Tape t;
  const SequenceForward f = record_sequence_forward(t, m.gru, g);
  const std::vector<double> y = sequence_predictions(t, f);
  StateField pred(StateKind::T, g.n_t, g.n_z);
  for (std::size_t j = 0; j < g.n_t; ++j)
    for (std::size_t s = 0; s < layout.train_levels.size(); ++s)
      pred.at(j, layout.train_levels[s]) = y[j * m.gru.out + s];
  return pred;
}

// one column per successive sensor pair, one row per time step
void write_pair_series(const fs::path& path,
                       const std::vector<std::size_t>& levels,
                       const std::vector<std::vector<double>>& series) {
  std::ostringstream out;
  out << "t_index";
  for (std::size_t k = 0; k + 1 < levels.size(); ++k)
    out << ",d" << levels[k] << "_" << levels[k + 1];
  out << '\n';
  if (!series.empty()) {
    for (std::size_t t = 0; t < series.front().size(); ++t) {
      out << t;
      for (const std::vector<double>& s : series)
        out << ',' << format_cell(s[t]);
      out << '\n';
    }
  }
  write_text(path, out.str());
}

std::vector<std::vector<double>> scaled_pairs(
    const StateField& T, const std::vector<std::size_t>& levels) {
  std::vector<std::vector<double>> out;
  for (const std::vector<double>& s : delta_T(T, levels))
    out.push_back(min_max_scale(s));
  return out;
}

}  // namespace

void cmd_simulate(const RunConfig& cfg) {
  const ReactorParams params = load_params(cfg.params_path);
  const Grid grid = make_uniform_grid(params, cfg.n_z, cfg.n_t);
  const std::vector<Scenario> scenarios =
      cfg.scenarios.empty() ? canonical_scenarios() : cfg.scenarios;
  const fs::path root = out_root(cfg);
  for (const Scenario& sc : scenarios) {
    const FineSolution fine = simulate_cycle(grid, params, sc);
    CycleData d;
    d.fields = downsample(fine, cfg.n_t, cfg.n_z);
    d.velocity = grid.velocity;
    const fs::path dir = root / sc.name;
    fs::create_directories(dir);
    write_cycle_csv((dir / "data.csv").string(), d);
    CycleMeta meta;
    meta.name = sc.name;
    meta.seed = sc.rng_seed;
    meta.mult_T = sc.mult_T;
    meta.mult_xa = sc.mult_xa;
    meta.mult_xp = sc.mult_xp;
    meta.walk = sc.walk;
    meta.crossing = fine.crossing;
    write_cycle_meta((dir / "meta.json").string(), meta);
  }
}

void cmd_train(const RunConfig& cfg) {
  const ReactorParams params = load_params(cfg.params_path);
  const CycleData data = load_cycle(cfg, cfg.dataset);
  const Grid grid = grid_from_cycle(data, params);
  const ModelVariant v = parse_variant(cfg.variant);
  const SensorLayout layout = layout_from_config(cfg, grid.n_z);
  const LossConfig loss = cfg.has_loss ? cfg.loss : default_loss_config(v);
  const TrainSchedule sched =
      cfg.has_schedule ? cfg.schedule : default_schedule(v);
  if (cfg.seeds.empty()) throw ConfigError("config field 'seeds' is empty");

  const TrainResult res = train_sweep(v, cfg.seeds, grid, data.fields, layout,
                                      loss, sched, cfg.gru_hidden);

  const fs::path root = out_root(cfg);
  fs::create_directories(root / "manifests");
  fs::create_directories(root / "history");
  std::size_t total_iters = 0;
  for (const TrainPhase& p : sched.phases) total_iters += p.iterations;

  for (const TrainRun& run : res.runs) {
    ordered_json m;
    m["seed"] = run.seed;
    m["variant"] = cfg.variant;
    m["iterations"] = total_iters;
    m["sensor_shift"] = sched.sensor_shift;
    m["gaussian_noise"] = sched.gaussian_noise;
    m["selection_metric"] = run.selection_metric;
    m["selection_mse"] = run.selection_mse;
    m["train_fit_mse"] = run.train_fit_mse;
    m["initial_loss"] = run.history.empty() ? 0.0 : run.history.front();
    m["final_loss"] = run.history.empty() ? 0.0 : run.history.back();
    m["descent"] = run.descent;
    write_text(root / "manifests" /
                   ("seed_" + std::to_string(run.seed) + ".json"),
               m.dump(2) + "\n");

    std::ostringstream h;
    h << "iteration,loss\n";
    for (std::size_t i = 0; i < run.history.size(); ++i)
      h << i << ',' << format_cell(run.history[i]) << '\n';
    write_text(root / "history" /
                   ("seed_" + std::to_string(run.seed) + ".csv"),
               h.str());
  }

  const TrainRun& best = res.runs[res.selected];
  save_checkpoint((root / "checkpoint.json").string(),
                  model_to_checkpoint(best.model));
  ordered_json sel;
  sel["variant"] = cfg.variant;
  sel["selected_seed"] = best.seed;
  sel["selection_metric"] = best.selection_metric;
  ordered_json runs = ordered_json::array();
  for (const TrainRun& run : res.runs)
    runs.push_back({{"seed", run.seed}, {"selection_mse", run.selection_mse}});
  sel["runs"] = std::move(runs);
  write_text(root / "selection.json", sel.dump(2) + "\n");
}

namespace {

struct EvalEntry {
  MetricReport report;
  std::string variant;
  std::string dataset;
};

std::string table_cell(double v) { return format_cell(v); }

const SplitMetrics* find_split(const MetricReport& r, const std::string& s) {
  for (const SplitMetrics& m : r.splits)
    if (m.split == s) return &m;
  return nullptr;
}

}  // namespace

void cmd_evaluate(const RunConfig& cfg) {
  const ReactorParams params = load_params(cfg.params_path);
  std::vector<std::string> model_paths = cfg.checkpoints;
  if (model_paths.empty() && !cfg.checkpoint.empty())
    model_paths.push_back(cfg.checkpoint);
  if (model_paths.empty())
    throw ConfigError("cmd_evaluate needs 'checkpoint' or 'checkpoints'");

  std::vector<std::string> datasets;
  datasets.push_back(cfg.dataset);
  for (const std::string& t : cfg.tests) datasets.push_back(t);

  std::vector<EvalEntry> entries;
  for (const std::string& path : model_paths) {
    const GridModel model = load_model(path);
    const std::string vname = variant_name(model.variant);
    for (const std::string& ds : datasets) {
      const CycleData data = load_cycle(cfg, ds);
      const Grid grid = grid_from_cycle(data, params);
      const SensorLayout layout = layout_from_config(cfg, grid.n_z);

      EvalEntry e;
      e.variant = vname;
      e.dataset = ds;
      e.report.variant = vname;
      e.report.dataset = ds;

      if (uses_grid(model.variant)) {
        const StateFields pred = grid_forward(model, grid);
        e.report.splits.push_back(
            eval_split("train", pred.T, data.fields.T, layout.train_levels));
        if (ds == cfg.dataset) {
          e.report.splits.push_back(
              eval_split("val1", pred.T, data.fields.T, layout.val1_levels));
          e.report.splits.push_back(
              eval_split("val2", pred.T, data.fields.T, layout.val2_levels));
        }
        e.report.r2_average = r2_avg(pred, data.fields);
      } else {
        // the sequence baseline only predicts at its own sensor levels
        const StateField pred = sequence_T(model, grid, layout);
        e.report.splits.push_back(
            eval_split("train", pred, data.fields.T, layout.train_levels));
      }
      entries.push_back(std::move(e));
    }
  }

  const fs::path root = out_root(cfg);

  std::ostringstream flat;
  flat << report_csv_header() << '\n';
  for (const EvalEntry& e : entries)
    for (const std::string& row : report_csv_rows(e.report)) flat << row << '\n';
  write_text(root / "metrics.csv", flat.str());

  json all = json::array();
  for (const EvalEntry& e : entries)
    all.push_back(json::parse(report_to_json(e.report)));
  write_text(root / "metrics.json", all.dump(2) + "\n");

  // pivoted tables: rows = variants, columns = fit-cycle splits then tests
  std::vector<std::string> variants;
  for (const EvalEntry& e : entries)
    if (std::find(variants.begin(), variants.end(), e.variant) ==
        variants.end())
      variants.push_back(e.variant);

  auto entry_of = [&](const std::string& v,
                      const std::string& ds) -> const EvalEntry* {
    for (const EvalEntry& e : entries)
      if (e.variant == v && e.dataset == ds) return &e;
    return nullptr;
  };

  auto write_table = [&](const std::string& file, auto metric) {
    std::ostringstream out;
    out << "variant,train,val1,val2";
    for (const std::string& t : cfg.tests) out << ',' << t;
    out << '\n';
    for (const std::string& v : variants) {
      out << v;
      const EvalEntry* fit = entry_of(v, cfg.dataset);
      for (const char* split : {"train", "val1", "val2"}) {
        const SplitMetrics* m = fit ? find_split(fit->report, split) : nullptr;
        out << ',' << (m ? table_cell(metric(*m)) : std::string());
      }
      for (const std::string& t : cfg.tests) {
        const EvalEntry* e = entry_of(v, t);
        const SplitMetrics* m = e ? find_split(e->report, "train") : nullptr;
        out << ',' << (m ? table_cell(metric(*m)) : std::string());
      }
      out << '\n';
    }
    write_text(root / file, out.str());
  };

  write_table("table_dt_nrmse.csv",
              [](const SplitMetrics& m) { return m.dt_nrmse; });
  write_table("table_t_nrmse.csv",
              [](const SplitMetrics& m) { return m.t_nrmse; });
  write_table("table_pearson.csv",
              [](const SplitMetrics& m) { return m.pearson_T; });

  std::ostringstream r2t;
  r2t << "variant";
  for (const std::string& ds : datasets) r2t << ',' << ds;
  r2t << '\n';
  for (const std::string& v : variants) {
    r2t << v;
    for (const std::string& ds : datasets) {
      const EvalEntry* e = entry_of(v, ds);
      r2t << ','
          << (e && !std::isnan(e->report.r2_average)
                  ? table_cell(e->report.r2_average)
                  : std::string());
    }
    r2t << '\n';
  }
  write_text(root / "table_r2.csv", r2t.str());
}

void cmd_reconstruct(const RunConfig& cfg) {
  const ReactorParams params = load_params(cfg.params_path);
  const GridModel model = load_model(cfg.checkpoint);
  if (!uses_grid(model.variant))
    throw ConfigError(
        "state reconstruction is unsupported for the sequence baseline: it "
        "carries no concentration or activity fields");
  const CycleData data = load_cycle(cfg, cfg.dataset);
  const Grid grid = grid_from_cycle(data, params);
  const SensorLayout layout = layout_from_config(cfg, grid.n_z);

  const StateFields pred = reconstruct_states(model, grid);
  const fs::path root = out_root(cfg);
  write_matrix_csv((root / "xa.csv").string(), pred.xa);
  write_matrix_csv((root / "xp.csv").string(), pred.xp);
  write_matrix_csv((root / "T.csv").string(), pred.T);
  write_matrix_csv((root / "theta.csv").string(), pred.theta);

  const std::vector<std::size_t>& lv = layout.train_levels;
  write_pair_series(root / "deltaT_pred.csv", lv, delta_T(pred.T, lv));
  write_pair_series(root / "deltaT_truth.csv", lv, delta_T(data.fields.T, lv));
  write_pair_series(root / "plot_deltaT_pred.csv", lv, scaled_pairs(pred.T, lv));
  write_pair_series(root / "plot_deltaT_truth.csv", lv,
                    scaled_pairs(data.fields.T, lv));

  ordered_json j;
  j["variant"] = variant_name(model.variant);
  j["dataset"] = cfg.dataset;
  j["r2_xa"] = r2(pred.xa.v, data.fields.xa.v);
  j["r2_xp"] = r2(pred.xp.v, data.fields.xp.v);
  j["r2_T"] = r2(pred.T.v, data.fields.T.v);
  j["r2_theta"] = r2(pred.theta.v, data.fields.theta.v);
  j["r2_average"] = r2_avg(pred, data.fields);
  write_text(root / "reconstruct.json", j.dump(2) + "\n");
}

void cmd_sensitivity(const RunConfig& cfg) {
  const ReactorParams params = load_params(cfg.params_path);
  const GridModel model = load_model(cfg.checkpoint);
  if (!uses_grid(model.variant))
    throw ConfigError(
        "sensitivity sweeps are unsupported for the sequence baseline: it "
        "cannot forward perturbed inlet conditions off its sensors");
  const CycleData data = load_cycle(cfg, cfg.dataset);
  const Grid grid = grid_from_cycle(data, params);
  const SensorLayout layout = layout_from_config(cfg, grid.n_z);
  const std::vector<SensitivityCase> cases =
      cfg.cases.empty() ? default_sensitivity_cases() : cfg.cases;

  const fs::path root = out_root(cfg);
  ordered_json summary = ordered_json::array();
  for (const SensitivityCase& c : cases) {
    const SensitivityResponse r =
        sensitivity_sweep(model, grid, layout.train_levels, c);
    write_pair_series(root / (c.name + "_base.csv"), r.levels, r.base);
    write_pair_series(root / (c.name + "_pert.csv"), r.levels, r.pert);
    ordered_json e;
    e["name"] = c.name;
    e["mult_T"] = c.mult_T;
    e["mult_xa"] = c.mult_xa;
    e["mult_xp"] = c.mult_xp;
    e["base_cross"] = r.base_cross;
    e["pert_cross"] = r.pert_cross;
    e["cross_shift"] = r.pert_cross - r.base_cross;
    summary.push_back(std::move(e));
  }
  write_text(root / "sensitivity.json", summary.dump(2) + "\n");
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "reactor-grid: simulate catalyst poisoning cycles and fit "
      "grid-structured surrogate models to sparse temperature sensors"};
  app.require_subcommand(1);

  struct SubArgs {
    std::string config;
    std::string out;
    std::int64_t seed = -1;
  };
  std::map<std::string, SubArgs> args;
  const std::pair<const char*, const char*> subs[] = {
      {"simulate", "generate the training cycle and the five test cycles"},
      {"train", "run the seed sweep and write the selected checkpoint"},
      {"evaluate", "score checkpoints and write the metric tables"},
      {"reconstruct", "export the four reconstructed state fields"},
      {"sensitivity", "compare responses under perturbed inlet conditions"}};
  for (const auto& [name, desc] : subs) {
    CLI::App* sub = app.add_subcommand(name, desc);
    SubArgs& a = args[name];
    sub->add_option("--config", a.config, "JSON run configuration")
        ->required();
    sub->add_option("--out", a.out, "override the output directory");
    sub->add_option("--seed", a.seed, "override the configured seeds");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    const SubArgs& a = args[name];
    RunConfig cfg = load_config(a.config);
    if (const char* env = std::getenv("REACTOR_GRID_OUT"))
      if (*env) cfg.out_dir = env;
    if (!a.out.empty()) cfg.out_dir = a.out;
    if (a.seed >= 0) {
      const std::uint64_t s = static_cast<std::uint64_t>(a.seed);
      if (cfg.scenarios.empty())
        cfg.scenarios = canonical_scenarios(s);
      else
        for (Scenario& sc : cfg.scenarios) sc.rng_seed = s;
      cfg.seeds = {s};
    }

    if (name == "simulate")
      cmd_simulate(cfg);
    else if (name == "train")
      cmd_train(cfg);
    else if (name == "evaluate")
      cmd_evaluate(cfg);
    else if (name == "reconstruct")
      cmd_reconstruct(cfg);
    else
      cmd_sensitivity(cfg);
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const MissingArtifact& e) {
    std::fprintf(stderr, "missing artifact: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace reactor
