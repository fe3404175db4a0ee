#pragma once

// Experiment harness behind the reactor-grid executable: cycle generation,
// training sweeps, metric tables, state reconstruction and sensitivity
// exports, all driven by one JSON config document.
//
// Config schema (all fields optional unless a command needs them):
//   out_dir      string, output directory ("out"); overridden by --out or
//                the REACTOR_GRID_OUT environment variable
//   params_path  string, JSON file with reactor constants (defaults used
//                when empty)
//   grid         {"n_z": 46, "n_t": 93}
//   scenarios    [{"name","seed","mult_T","mult_xa","mult_xp","walk"}];
//                defaults to the canonical six cycles
//   dataset_dir  string, directory holding one subdirectory per cycle
//   dataset      string, cycle consumed by train/reconstruct/sensitivity
//   variant      pde-param | mlp | mlp-reg | gru | grid-gru | grid-gru-augm
//   seeds        [uint...], training sweep seeds
//   gru_hidden   uint, hidden width of the recurrent baselines
//   layout       "default" | "real" | {"train":[..],"val1":[..],"val2":[..]}
//   schedule     {"phases":[{"iterations","lr"}...],"sensor_shift",
//                 "gaussian_noise","shift_prob","noise_factor"}
//   loss         {"lambda_a","lambda_p","t_prime","enable_C1","enable_C2"}
//   checkpoint   string, model file for evaluate/reconstruct/sensitivity
//   checkpoints  [string...], multiple models for evaluate tables
//   tests        [string...], test cycles scored by evaluate
//   sensitivity  [{"name","mult_T","mult_xa","mult_xp"}...]

#include <cstdint>
#include <string>
#include <vector>

#include "reactor/evaluation.hpp"
#include "reactor/simulator.hpp"
#include "reactor/training.hpp"

namespace reactor {

struct RunConfig {
  std::string out_dir = "out";
  std::string params_path;
  std::size_t n_z = 46, n_t = 93;
  std::vector<Scenario> scenarios;  // empty = canonical six
  std::string dataset_dir;
  std::string dataset = "train";
  std::string variant = "pde-param";
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::size_t gru_hidden = 8;
  std::string layout = "default";  // or "real" or "explicit"
  SensorLayout explicit_layout;    // used when layout == "explicit"
  bool has_schedule = false;       // config overrides the variant default
  TrainSchedule schedule;
  bool has_loss = false;
  LossConfig loss;
  std::string checkpoint;
  std::vector<std::string> checkpoints;
  std::vector<std::string> tests = {"test1", "test2", "test3", "test4",
                                    "test5"};
  std::vector<SensitivityCase> cases;  // empty = the default three
};

// the six cycles of the synthetic protocol: the training cycle, a fresh
// random walk, and the four operating-condition changes
std::vector<Scenario> canonical_scenarios(std::uint64_t base_seed = 1);

RunConfig parse_config(const std::string& json_text);  // ConfigError
RunConfig load_config(const std::string& path);  // MissingArtifact on top

// full document with every field materialized, fixed key order; parsing
// the canonical form and re-serializing reproduces it byte for byte
std::string canonical_config(const RunConfig& cfg);

// constants from a JSON file of name -> value pairs; unknown names are
// configuration errors, absent names keep their defaults
ReactorParams load_params(const std::string& path);

SensorLayout layout_from_config(const RunConfig& cfg, std::size_t n_z);

void cmd_simulate(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg);
void cmd_reconstruct(const RunConfig& cfg);
void cmd_sensitivity(const RunConfig& cfg);

// argument parsing plus error-to-exit-code mapping: 0 success, 2 bad
// configuration, 3 missing artifact, 4 numeric failure
int run_cli(int argc, const char* const* argv);

}  // namespace reactor
