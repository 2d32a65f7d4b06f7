#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hrm/dataset.hpp"
#include "hrm/model.hpp"

namespace hrm {

/// Per-segment record of a full rollout (no halting). Latents are flattened
/// row-major, seq_len * width values each.
struct ReasoningTrace {
  Eigen::VectorXd initial;
  std::vector<Eigen::VectorXd> snapshots;
  std::vector<PuzzleGrid> predictions;
  std::vector<double> loss;
  std::vector<int> energy;
  std::vector<bool> exact;
  std::vector<double> update_norm;  // |z_i - z_{i-1}|, the first against `initial`
  std::vector<HaltDecision> q;

  std::size_t size() const { return snapshots.size(); }
};

/// Runs all max_segments segments from z_init (or from `initial`, a
/// seq_len x width latent) and records every field.
ReasoningTrace capture_trace(const PuzzleGrid& x, const PuzzleGrid& y, const ModelParams<double>& params,
                             const ModelConfig& config, const Matrix<double>* initial = nullptr);

/// Batched capture for many samples or many starting points.
std::vector<ReasoningTrace> capture_traces(std::span<const PuzzleGrid> xs, std::span<const PuzzleGrid> ys,
                                           const ModelParams<double>& params, const ModelConfig& config,
                                           std::span<const Matrix<double>> initial = {});

/// First segment (1-based) from which every later prediction is exact, or -1
/// when the final segment is wrong.
int segments_to_correct(const ReasoningTrace& trace);

// ---------------------------------------------------------------------------
// PCA.

struct PcaResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;               // dim x dims, orthonormal columns
  Eigen::VectorXd explained_variance;  // descending
  std::vector<Eigen::MatrixXd> coords; // per trace: snapshots x dims
};

/// Centers all snapshots of the given traces, takes the top `dims`
/// covariance eigenvectors (each signed so its largest-magnitude entry is
/// positive) and projects every trajectory. Throws std::invalid_argument on
/// fewer than two snapshots or zero variance.
PcaResult pca_project(std::span<const ReasoningTrace> traces, int dims = 2);

/// Same decomposition on raw row vectors (one point per row).
PcaResult pca_points(const Eigen::MatrixXd& points, int dims = 2);

Eigen::VectorXd project(const PcaResult& pca, const Eigen::VectorXd& z);
Eigen::VectorXd unproject(const PcaResult& pca, const Eigen::VectorXd& coords);

// ---------------------------------------------------------------------------
// Fixed points and reasoning modes.

struct FixedPointReport {
  int segment = 0;  // latent after this many segments is already fixed (0 = initial)
  bool is_true = false;
  int energy = 0;
  double max_relative_update = 0.0;
};

/// Earliest segment i with |z_{j+1} - z_j| / max(|z_j|, eps) < tol_rel for
/// every j >= i. True when the final prediction is exact.
std::optional<FixedPointReport> detect_fixed_point(const ReasoningTrace& trace, double tol_rel = 1e-3,
                                                   double eps = 1e-12);

enum class Mode { TrivialSuccess, NontrivialSuccess, TrivialFailure, NontrivialFailure };

std::string mode_name(Mode m);

struct ModeThresholds {
  int trivial_first = 2;       // success no later than this segment is trivial
  int plateau_length = 3;      // this many quiet segments make a success nontrivial
  double plateau_tol = 1e-2;   // relative update below which a segment is quiet
  double fixed_point_tol = 1e-3;
};

struct ModeLabel {
  Mode mode = Mode::TrivialFailure;
  int first_correct = -1;  // start of the final correct run, 1-based
  int plateau = 0;         // longest quiet run before first_correct
  bool converged = false;  // a fixed point was detected
};

/// Success iff the final segment is exact. A success is trivial when its
/// correct run starts by `trivial_first` without a plateau of
/// `plateau_length` quiet segments, nontrivial otherwise. A failure is
/// nontrivial iff a fixed point is detected.
ModeLabel classify_mode(const ReasoningTrace& trace, const ModeThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// Plane maps.

/// A 2-D lattice on a PCA plane, centered at `center` (plane coordinates)
/// with half-widths `extent`.
struct PlaneGrid {
  PcaResult pca;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d extent = Eigen::Vector2d::Ones();
  int resolution = 41;

  Eigen::Vector2d point(int ix, int iy) const;
  Eigen::VectorXd latent(int ix, int iy) const;
};

/// Lattice spanning +-span_std standard deviations of the projected
/// coordinates around their mean.
PlaneGrid plane_from_pca(const PcaResult& pca, int resolution = 41, double span_std = 3.0);

struct BasinCell {
  double px = 0.0;
  double py = 0.0;
  int steps = -1;  // segments to a stable correct prediction, -1 on failure
  double dx = 0.0; // first update projected on the plane
  double dy = 0.0;
  double first_update_norm = 0.0;  // full-space norm
};

/// Cells in row-major lattice order (iy outer, ix inner).
std::vector<BasinCell> basin_map(const PuzzleGrid& x, const PuzzleGrid& y, const ModelParams<double>& params,
                                 const ModelConfig& config, const PlaneGrid& plane);

struct LandscapeCell {
  double px = 0.0;
  double py = 0.0;
  int energy = 0;
};

struct ProfilePoint {
  double t = 0.0;
  int energy = 0;
};

struct EnergyLandscape {
  std::vector<LandscapeCell> field;
  std::vector<ProfilePoint> profile;
};

/// Conflict energy of the decoded output at every lattice point, plus a
/// profile on the segment from attractor `from` to `to` when both are given.
EnergyLandscape energy_landscape(const PlaneGrid& plane, const ModelParams<double>& params, const ModelConfig& config,
                                 const Eigen::VectorXd* from = nullptr, const Eigen::VectorXd* to = nullptr,
                                 int profile_points = 41);

// ---------------------------------------------------------------------------
// Jacobian probe.

using LinearMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct SpectralEstimate {
  double norm = 0.0;
  std::vector<double> history;
};

/// Power iteration on J^T J from a seeded random start.
SpectralEstimate spectral_norm_estimate(const LinearMap& jvp, const LinearMap& vjp, Eigen::Index dim, int iters,
                                        std::uint64_t seed = 0);

/// Estimates the spectral norm of d segment / d z at z. Jacobian-vector
/// products use central differences of the segment map (step fd_step);
/// vector-Jacobian products come from the gradient tape.
SpectralEstimate jacobian_probe(const Matrix<double>& z, const Matrix<double>& x_emb,
                                const ModelParams<double>& params, const ModelConfig& config, int iters,
                                double fd_step = 1e-5, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Stability audit.

enum class ProbeKind { FullyRevealed, OneCell, OneRow };

std::string probe_kind_name(ProbeKind k);
ProbeKind probe_kind_from_name(const std::string& name);

struct Probe {
  Sample sample;
  ProbeKind kind = ProbeKind::FullyRevealed;
};

/// One probe per solution: the solution itself, or with one random cell or
/// one random row blanked.
std::vector<Probe> make_probes(std::span<const PuzzleGrid> solutions, ProbeKind kind, std::uint64_t seed);

struct ProbeVerdict {
  ProbeKind kind = ProbeKind::FullyRevealed;
  bool ever_correct = false;
  bool stable = false;  // never-correct probes are not stable
  int first_correct = -1;
};

struct StabilityReport {
  double rate = 0.0;  // stable / probes
  int probes = 0;
  int stable = 0;
  int never_correct = 0;
  std::vector<ProbeVerdict> verdicts;
};

StabilityReport stability_audit(const ModelParams<double>& params, std::span<const Probe> probes,
                                const ModelConfig& config);

// ---------------------------------------------------------------------------
// Exports.

/// One JSON object per segment; snapshots included on request.
std::string trace_to_jsonl(const ReasoningTrace& trace, bool include_snapshots = false);
std::string basin_to_csv(const std::vector<BasinCell>& cells);
std::string landscape_to_csv(const EnergyLandscape& landscape);
std::string profile_to_csv(const EnergyLandscape& landscape);
nlohmann::json stability_to_json(const StabilityReport& report);

}  // namespace hrm
