#include "reactor/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace reactor {

std::string format_cell(double v) {
  if (std::isnan(v)) return {};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ConfigError("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw MissingArtifact("no such file: '" + path + "'");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open '" + path + "'");
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_cell(const std::string& s, const std::string& path) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("non-numeric cell '" + s + "' in '" + path + "'");
  }
  if (used != s.size())
    throw ConfigError("non-numeric cell '" + s + "' in '" + path + "'");
  return v;
}

}  // namespace

void write_cycle_csv(const std::string& path, const CycleData& d) {
  const std::size_t n_t = d.fields.T.n_t;
  const std::size_t n_z = d.fields.T.n_z;
  if (d.velocity.size() != n_t)
    throw std::invalid_argument("write_cycle_csv: velocity length mismatch");
  std::ofstream out = open_out(path);
  out << kCycleCsvHeader << '\n';
  for (std::size_t t = 0; t < n_t; ++t)
    for (std::size_t z = 0; z < n_z; ++z)
      out << t << ',' << z << ',' << format_cell(d.fields.xa.at(t, z)) << ','
          << format_cell(d.fields.xp.at(t, z)) << ','
          << format_cell(d.fields.T.at(t, z)) << ','
          << format_cell(d.fields.theta.at(t, z)) << ','
          << format_cell(d.velocity[t]) << '\n';
}

CycleData read_cycle_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != split_csv(kCycleCsvHeader))
    throw ConfigError("'" + path + "' does not start with the cycle header");

  struct Row {
    std::size_t t, z;
    double xa, xp, T, theta, U;
  };
  std::vector<Row> rows;
  std::size_t n_t = 0, n_z = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> c = split_csv(line);
    if (c.size() != 7)
      throw ConfigError("row with " + std::to_string(c.size()) +
                        " cells in '" + path + "', expected 7");
    Row r;
    r.t = static_cast<std::size_t>(parse_cell(c[0], path));
    r.z = static_cast<std::size_t>(parse_cell(c[1], path));
    r.xa = parse_cell(c[2], path);
    r.xp = parse_cell(c[3], path);
    r.T = parse_cell(c[4], path);
    r.theta = parse_cell(c[5], path);
    r.U = parse_cell(c[6], path);
    n_t = std::max(n_t, r.t + 1);
    n_z = std::max(n_z, r.z + 1);
    rows.push_back(r);
  }
  if (rows.empty()) throw ConfigError("'" + path + "' has no data rows");
  if (rows.size() != n_t * n_z)
    throw ConfigError("'" + path + "' has " + std::to_string(rows.size()) +
                      " rows, expected " + std::to_string(n_t * n_z) +
                      " for a full grid");

  CycleData d;
  d.fields.xa = StateField(StateKind::xa, n_t, n_z);
  d.fields.xp = StateField(StateKind::xp, n_t, n_z);
  d.fields.T = StateField(StateKind::T, n_t, n_z);
  d.fields.theta = StateField(StateKind::theta, n_t, n_z);
  d.velocity.assign(n_t, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> seen(n_t * n_z, 0);
  for (const Row& r : rows) {
    if (seen[r.t * n_z + r.z])
      throw ConfigError("duplicate (t,z) row in '" + path + "'");
    seen[r.t * n_z + r.z] = 1;
    d.fields.xa.at(r.t, r.z) = r.xa;
    d.fields.xp.at(r.t, r.z) = r.xp;
    d.fields.T.at(r.t, r.z) = r.T;
    d.fields.theta.at(r.t, r.z) = r.theta;
    d.velocity[r.t] = r.U;
  }
  return d;
}

void write_cycle_meta(const std::string& path, const CycleMeta& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["seed"] = m.seed;
  j["mult_T"] = m.mult_T;
  j["mult_xa"] = m.mult_xa;
  j["mult_xp"] = m.mult_xp;
  j["walk"] = m.walk;
  j["crossing"] = m.crossing;
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

CycleMeta read_cycle_meta(const std::string& path) {
  std::ifstream in = open_in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  CycleMeta m;
  try {
    m.name = j.at("name").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.mult_T = j.at("mult_T").get<double>();
    m.mult_xa = j.at("mult_xa").get<double>();
    m.mult_xp = j.at("mult_xp").get<double>();
    m.walk = j.at("walk").get<bool>();
    m.crossing = j.at("crossing").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad cycle metadata in '" + path + "': " + e.what());
  }
  return m;
}

void write_matrix_csv(const std::string& path, const StateField& f) {
  std::ofstream out = open_out(path);
  for (std::size_t t = 0; t < f.n_t; ++t) {
    for (std::size_t z = 0; z < f.n_z; ++z) {
      if (z) out << ',';
      out << format_cell(f.at(t, z));
    }
    out << '\n';
  }
}

StateField read_matrix_csv(const std::string& path, StateKind kind) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& c : cells) row.push_back(parse_cell(c, path));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError("ragged rows in '" + path + "'");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("'" + path + "' has no data rows");
  StateField f(kind, rows.size(), rows.front().size());
  for (std::size_t t = 0; t < f.n_t; ++t)
    for (std::size_t z = 0; z < f.n_z; ++z) f.at(t, z) = rows[t][z];
  return f;
}

Grid grid_from_cycle(const CycleData& d, const ReactorParams& p) {
  const std::size_t n_t = d.fields.T.n_t;
  const std::size_t n_z = d.fields.T.n_z;
  if (n_z < 2) throw ConfigError("cycle data needs at least two levels");
  Grid g;
  g.n_z = n_z;
  g.n_t = n_t;
  g.dz = p.L / static_cast<double>(n_z - 1);
  g.dt = 1.0;
  g.inlet_xa.resize(n_t);
  g.inlet_xp.resize(n_t);
  g.inlet_T.resize(n_t);
  for (std::size_t t = 0; t < n_t; ++t) {
    g.inlet_xa[t] = d.fields.xa.at(t, 0);
    g.inlet_xp[t] = d.fields.xp.at(t, 0);
    g.inlet_T[t] = d.fields.T.at(t, 0);
  }
  g.theta0.resize(n_z);
  for (std::size_t z = 0; z < n_z; ++z) g.theta0[z] = d.fields.theta.at(0, z);
  g.velocity = d.velocity;
  std::vector<std::string> bad = validate_grid(g);
  // the models divide by U, so a stored cycle must keep it positive
  for (double u : d.velocity)
    if (!(u > 0.0)) {
      bad.push_back("velocity: entries must be positive");
      break;
    }
  if (!bad.empty()) {
    std::string msg = "cycle data does not form a usable grid:";
    for (const std::string& b : bad) msg += " " + b + ";";
    throw ConfigError(msg);
  }
  return g;
}

}  // namespace reactor
