#pragma once

// File formats for simulated cycles: one CSV per cycle with a row per
// (time, level) sample, plus a JSON sidecar describing how the cycle was
// produced. Numbers are written with %.12g and LF endings so regenerating
// a dataset from the same seed is byte-stable.

#include <cstdint>
#include <string>
#include <vector>

#include "reactor/domain.hpp"

namespace reactor {

// %.12g, or an empty cell for values missing by design (NaN in memory)
std::string format_cell(double v);

inline constexpr const char* kCycleCsvHeader =
    "t_index,z_index,xa,xp,T,theta,U";

struct CycleData {
  StateFields fields;
  std::vector<double> velocity;  // one entry per time column
};

void write_cycle_csv(const std::string& path, const CycleData& d);
// MissingArtifact when the file does not exist, ConfigError on any
// schema violation (header, row count, index gaps, non-numeric cells)
CycleData read_cycle_csv(const std::string& path);

struct CycleMeta {
  std::string name;
  std::uint64_t seed = 0;
  double mult_T = 1.0, mult_xa = 1.0, mult_xp = 1.0;
  bool walk = true;
  // coarse steps until the outlet activity fell to the cycle-end
  // threshold, interpolated; -1 when unknown
  double crossing = -1.0;
};

void write_cycle_meta(const std::string& path, const CycleMeta& m);
CycleMeta read_cycle_meta(const std::string& path);

// plain numeric matrix, n_t rows by n_z columns, for field exports
void write_matrix_csv(const std::string& path, const StateField& f);
StateField read_matrix_csv(const std::string& path, StateKind kind);

// grid whose inputs replay a stored cycle: inlet series from level 0,
// initial activity from the first time row, velocity from the U column
Grid grid_from_cycle(const CycleData& d, const ReactorParams& p);

}  // namespace reactor
