#pragma once

// Assembly of per-location cells into the unrolled space-time graph. One
// recorded tape covers a whole cycle: boundary series and initial activity
// enter as leaves, so training and reconstruction re-drive the same graph
// with set_value + replay instead of re-recording.

#include <cstdint>
#include <vector>

#include "reactor/autodiff.hpp"
#include "reactor/cells.hpp"
#include "reactor/domain.hpp"

namespace reactor {

// one surrogate model: the variant tag picks which parameter family is
// active. A single parameter set is shared by every cell of the grid, so
// the learnable count never depends on n_z or n_t.
struct GridModel {
  ModelVariant variant = ModelVariant::pde_param;
  PdeCellParams pde;  // pde-param
  MlpCellParams mlp;  // mlp, mlp-reg
  GruParams gru;      // gru (sequence baseline), grid-gru, grid-gru-augm
};

// fresh model with seed-dependent weights. gru_hidden is 8 for the
// synthetic experiments and 32 for the real layout; gru_out is 3 for the
// grid variants (xa, xp, T channels) and the sensor count for the plain
// sequence baseline.
GridModel make_grid_model(ModelVariant v, std::uint64_t seed,
                          std::size_t gru_hidden = 8, std::size_t gru_out = 3);

Checkpoint model_to_checkpoint(const GridModel& m);
GridModel model_from_checkpoint(const Checkpoint& c);

// total learnable scalar count (shared cell parameters only)
std::size_t parameter_count(const GridModel& m);

// Handles into one recorded grid forward pass. Scalar state nodes are
// stored row-major in time like StateField. The MLP handles reference the
// network shapes of the model passed to the recorder; keep that model alive
// for as long as the tape is used.
struct GridForward {
  ModelVariant variant = ModelVariant::pde_param;
  std::size_t n_t = 0, n_z = 0;

  // boundary and initial-condition leaves
  ad::Var inlet_xa, inlet_xp, inlet_T;  // length n_t each
  ad::Var theta0;                       // length n_z

  // learnable leaves; only the variant's family is populated
  PdeCellVars cell;  // pde-param (8 raws) and mlp variants (6 raws)
  MlpVars ga, gp;    // mlp variants
  GruVars gru;       // grid-gru variants

  // scalar nodes per (t, z)
  std::vector<ad::Var> xa, xp, T, theta;

  ad::Var node(StateKind k, std::size_t t, std::size_t z) const;
  // every learnable leaf, in a fixed documented order (raws, then g_a net,
  // then g_p net for mlp; gate matrices W,U,b in z,r,c order then the
  // readout for gru)
  std::vector<ad::Var> learnable() const;
};

// Unrolls the grid on the tape. Column j computes (xa,xp,T) level by level
// from the inlet nodes while consuming activity column j; the activity
// column j+1 is produced by the same cells at every level; activity column
// 0 is the theta0 leaf. Velocity is read per time column and baked into the
// tape as immediates.
//
// For the grid-gru variants the per-level hidden state takes the role of
// the activity on the horizontal edges (initialized to zero at the first
// column) and an affine readout of it emits the next level's (xa,xp,T).
// The exported "theta" channel is the first hidden component clamped to
// [0,1]; it is a latent signal, not catalyst activity.
//
// Throws ConfigError for invalid grids, non-grid variants or non-positive
// velocities, NumericError naming (time column, level) if a cell emits a
// non-finite value during recording.
GridForward record_grid_forward(ad::Tape& t, const GridModel& m,
                                const Grid& g);

// record + read out all four fields (the soft-sensor output)
StateFields grid_forward(const GridModel& m, const Grid& g);
StateFields reconstruct_states(const GridModel& m, const Grid& g);

// copy the (possibly trained) leaf values of f back into m
void update_model(const ad::Tape& t, const GridForward& f, GridModel& m);

// Handles into one recorded pass of the plain sequence baseline: a GRU
// driven by the inlet series, h_0 = 0, emitting per-time predictions of the
// sensor temperatures through an affine readout. It sees no spatial
// structure, so it can only predict at the sensor levels it was fitted to.
struct SequenceForward {
  std::size_t n_t = 0, out = 0;
  ad::Var inlet_xa, inlet_xp, inlet_T;  // length n_t each
  GruVars gru;
  std::vector<ad::Var> y;  // n_t vector nodes, each of length out

  std::vector<ad::Var> learnable() const;
};

SequenceForward record_sequence_forward(ad::Tape& t, const GruParams& p,
                                        const Grid& g);

// read the baseline's predictions as an n_t x out matrix, row-major
std::vector<double> sequence_predictions(const ad::Tape& t,
                                         const SequenceForward& f);

}  // namespace reactor
