#include "hrm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hrm/errors.hpp"
#include "hrm/inference.hpp"
#include "hrm/rng.hpp"

namespace hrm {

namespace {

Eigen::VectorXd flatten(const Matrix<double>& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

Matrix<double> unflatten(const Eigen::VectorXd& v, const ModelConfig& config) {
  if (v.size() != static_cast<Eigen::Index>(config.seq_len()) * config.width) {
    throw ShapeError("latent vector has " + std::to_string(v.size()) + " values, expected " +
                     std::to_string(config.seq_len() * config.width));
  }
  return Eigen::Map<const Matrix<double>>(v.data(), config.seq_len(), config.width);
}

ReasoningTrace trace_from_rollout(const SampleRollout<double>& r, const PuzzleGrid& y) {
  ReasoningTrace t;
  t.initial = flatten(r.initial);
  Eigen::VectorXd prev = t.initial;
  for (std::size_t i = 0; i < r.states.size(); ++i) {
    Eigen::VectorXd snap = flatten(r.states[i]);
    t.update_norm.push_back((snap - prev).norm());
    prev = snap;
    t.snapshots.push_back(std::move(snap));
    t.predictions.push_back(r.predictions[i]);
    t.loss.push_back(r.loss[i]);
    t.energy.push_back(energy(r.predictions[i]));
    t.exact.push_back(r.predictions[i] == y);
    t.q.push_back(r.q[i]);
  }
  return t;
}

/// Latent before segment j (1-based): the initial state for j = 1.
const Eigen::VectorXd* state_before(const ReasoningTrace& t, std::size_t j) {
  if (j == 1) return t.initial.size() > 0 ? &t.initial : nullptr;
  return &t.snapshots[j - 2];
}

}  // namespace

std::vector<ReasoningTrace> capture_traces(std::span<const PuzzleGrid> xs, std::span<const PuzzleGrid> ys,
                                           const ModelParams<double>& params, const ModelConfig& config,
                                           std::span<const Matrix<double>> initial) {
  if (xs.size() != ys.size()) throw ShapeError("capture_traces: inputs and targets differ in count");
  RolloutOptions options;
  options.keep_states = true;
  const auto runs = rollout<double>(xs, params, config, options, ys, initial);
  std::vector<ReasoningTrace> out;
  out.reserve(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) out.push_back(trace_from_rollout(runs[i], ys[i]));
  return out;
}

ReasoningTrace capture_trace(const PuzzleGrid& x, const PuzzleGrid& y, const ModelParams<double>& params,
                             const ModelConfig& config, const Matrix<double>* initial) {
  std::span<const Matrix<double>> init;
  if (initial != nullptr) init = std::span<const Matrix<double>>(initial, 1);
  return std::move(capture_traces(std::span<const PuzzleGrid>(&x, 1), std::span<const PuzzleGrid>(&y, 1), params,
                                  config, init)
                       .front());
}

int segments_to_correct(const ReasoningTrace& trace) {
  const int n = static_cast<int>(trace.exact.size());
  if (n == 0 || !trace.exact.back()) return -1;
  int first = n;
  while (first > 1 && trace.exact[static_cast<std::size_t>(first - 2)]) --first;
  return first;
}

// ---------------------------------------------------------------------------

PcaResult pca_points(const Eigen::MatrixXd& points, int dims) {
  const Eigen::Index S = points.rows();
  const Eigen::Index D = points.cols();
  if (S < 2) throw std::invalid_argument("pca: need at least two snapshots");
  if (dims < 1 || dims > D) throw std::invalid_argument("pca: dims must lie in [1, dimension]");
  PcaResult out;
  out.mean = points.colwise().mean().transpose();
  const Eigen::MatrixXd X = points.rowwise() - out.mean.transpose();
  const double total = X.squaredNorm();
  if (!(total > 0.0)) throw std::invalid_argument("pca: zero variance (all snapshots identical)");
  const double denom = static_cast<double>(S - 1);

  out.basis.resize(D, dims);
  out.explained_variance.resize(dims);
  if (S <= D) {
    const Eigen::MatrixXd gram = X * X.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    for (int k = 0; k < dims; ++k) {
      const Eigen::Index idx = S - 1 - k;
      out.explained_variance(k) = idx >= 0 ? std::max(0.0, eig.eigenvalues()(idx)) : 0.0;
      Eigen::VectorXd v = Eigen::VectorXd::Zero(D);
      if (idx >= 0) v = X.transpose() * eig.eigenvectors().col(idx);
      out.basis.col(k) = v;
    }
  } else {
    const Eigen::MatrixXd cov = X.transpose() * X / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    for (int k = 0; k < dims; ++k) {
      out.explained_variance(k) = std::max(0.0, eig.eigenvalues()(D - 1 - k));
      out.basis.col(k) = eig.eigenvectors().col(D - 1 - k);
    }
  }

  // Orthonormalize; directions without variance are completed from the
  // standard basis.
  const double tiny = 1e-10 * std::sqrt(total);
  for (int k = 0; k < dims; ++k) {
    Eigen::VectorXd v = out.basis.col(k);
    for (int j = 0; j < k; ++j) v -= out.basis.col(j).dot(v) * out.basis.col(j);
    if (v.norm() <= tiny) {
      for (Eigen::Index e = 0; e < D; ++e) {
        v = Eigen::VectorXd::Unit(D, e);
        for (int j = 0; j < k; ++j) v -= out.basis.col(j).dot(v) * out.basis.col(j);
        if (v.norm() > 0.5) break;
      }
    }
    v.normalize();
    Eigen::Index peak = 0;
    v.cwiseAbs().maxCoeff(&peak);
    if (v(peak) < 0.0) v = -v;
    out.basis.col(k) = v;
  }
  out.coords.push_back(X * out.basis);
  return out;
}

PcaResult pca_project(std::span<const ReasoningTrace> traces, int dims) {
  Eigen::Index rows = 0;
  Eigen::Index dim = -1;
  for (const ReasoningTrace& t : traces) {
    for (const auto& s : t.snapshots) {
      if (dim >= 0 && s.size() != dim) throw ShapeError("pca_project: snapshots differ in size");
      dim = s.size();
      ++rows;
    }
  }
  if (rows < 2) throw std::invalid_argument("pca: need at least two snapshots");
  Eigen::MatrixXd points(rows, dim);
  Eigen::Index r = 0;
  for (const ReasoningTrace& t : traces) {
    for (const auto& s : t.snapshots) points.row(r++) = s.transpose();
  }
  PcaResult out = pca_points(points, dims);
  const Eigen::MatrixXd all = std::move(out.coords.front());
  out.coords.clear();
  r = 0;
  for (const ReasoningTrace& t : traces) {
    const auto n = static_cast<Eigen::Index>(t.snapshots.size());
    out.coords.push_back(all.middleRows(r, n));
    r += n;
  }
  return out;
}

Eigen::VectorXd project(const PcaResult& pca, const Eigen::VectorXd& z) {
  return pca.basis.transpose() * (z - pca.mean);
}

Eigen::VectorXd unproject(const PcaResult& pca, const Eigen::VectorXd& coords) {
  return pca.mean + pca.basis * coords;
}

// ---------------------------------------------------------------------------

std::optional<FixedPointReport> detect_fixed_point(const ReasoningTrace& trace, double tol_rel, double eps) {
  std::vector<const Eigen::VectorXd*> states;
  const bool has_initial = trace.initial.size() > 0;
  if (has_initial) states.push_back(&trace.initial);
  for (const auto& s : trace.snapshots) states.push_back(&s);
  if (states.size() < 2) return std::nullopt;
  std::vector<double> rel(states.size() - 1);
  for (std::size_t j = 0; j + 1 < states.size(); ++j) {
    rel[j] = (*states[j + 1] - *states[j]).norm() / std::max(states[j]->norm(), eps);
  }
  if (!(rel.back() < tol_rel)) return std::nullopt;
  std::size_t i = rel.size() - 1;
  double worst = rel.back();
  while (i > 0 && rel[i - 1] < tol_rel) {
    --i;
    worst = std::max(worst, rel[i]);
  }
  FixedPointReport r;
  r.segment = static_cast<int>(i) + (has_initial ? 0 : 1);
  r.is_true = !trace.exact.empty() && trace.exact.back();
  r.energy = trace.energy.empty() ? 0 : trace.energy.back();
  r.max_relative_update = worst;
  return r;
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::TrivialSuccess: return "trivial_success";
    case Mode::NontrivialSuccess: return "nontrivial_success";
    case Mode::TrivialFailure: return "trivial_failure";
    case Mode::NontrivialFailure: return "nontrivial_failure";
  }
  return "unknown";
}

ModeLabel classify_mode(const ReasoningTrace& trace, const ModeThresholds& thresholds) {
  ModeLabel label;
  label.converged = detect_fixed_point(trace, thresholds.fixed_point_tol).has_value();
  label.first_correct = segments_to_correct(trace);
  if (label.first_correct < 0) {
    label.mode = label.converged ? Mode::NontrivialFailure : Mode::TrivialFailure;
    return label;
  }
  int run = 0;
  for (int j = 1; j < label.first_correct; ++j) {
    const Eigen::VectorXd* before = state_before(trace, static_cast<std::size_t>(j));
    const bool quiet = before != nullptr &&
                       trace.update_norm[static_cast<std::size_t>(j - 1)] / std::max(before->norm(), 1e-12) <
                           thresholds.plateau_tol;
    run = quiet ? run + 1 : 0;
    label.plateau = std::max(label.plateau, run);
  }
  const bool trivial = label.first_correct <= thresholds.trivial_first && label.plateau < thresholds.plateau_length;
  label.mode = trivial ? Mode::TrivialSuccess : Mode::NontrivialSuccess;
  return label;
}

// ---------------------------------------------------------------------------

Eigen::Vector2d PlaneGrid::point(int ix, int iy) const {
  const double denom = resolution > 1 ? static_cast<double>(resolution - 1) : 1.0;
  const double fx = resolution > 1 ? -1.0 + 2.0 * ix / denom : 0.0;
  const double fy = resolution > 1 ? -1.0 + 2.0 * iy / denom : 0.0;
  return {center(0) + fx * extent(0), center(1) + fy * extent(1)};
}

Eigen::VectorXd PlaneGrid::latent(int ix, int iy) const {
  if (pca.basis.cols() < 2) throw ShapeError("plane grid needs a two-dimensional basis");
  return unproject(pca, Eigen::VectorXd(point(ix, iy)));
}

PlaneGrid plane_from_pca(const PcaResult& pca, int resolution, double span_std) {
  if (resolution < 1) throw std::invalid_argument("plane: resolution must be >= 1");
  if (pca.basis.cols() < 2) throw ShapeError("plane: need a two-dimensional PCA");
  Eigen::Index n = 0;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (const auto& c : pca.coords) {
    for (Eigen::Index r = 0; r < c.rows(); ++r) sum += c.row(r).head<2>().transpose();
    n += c.rows();
  }
  PlaneGrid plane;
  plane.pca = pca;
  plane.resolution = resolution;
  plane.center = n > 0 ? Eigen::Vector2d(sum / static_cast<double>(n)) : Eigen::Vector2d::Zero();
  Eigen::Vector2d var = Eigen::Vector2d::Zero();
  for (const auto& c : pca.coords) {
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
      const Eigen::Vector2d d = c.row(r).head<2>().transpose() - plane.center;
      var += d.cwiseProduct(d);
    }
  }
  if (n > 1) var /= static_cast<double>(n - 1);
  plane.extent = span_std * var.cwiseSqrt();
  for (int k = 0; k < 2; ++k) {
    if (!(plane.extent(k) > 0.0)) plane.extent(k) = 1.0;
  }
  return plane;
}

std::vector<BasinCell> basin_map(const PuzzleGrid& x, const PuzzleGrid& y, const ModelParams<double>& params,
                                 const ModelConfig& config, const PlaneGrid& plane) {
  const int R = plane.resolution;
  std::vector<Matrix<double>> starts;
  std::vector<Eigen::Vector2d> points;
  starts.reserve(static_cast<std::size_t>(R * R));
  for (int iy = 0; iy < R; ++iy) {
    for (int ix = 0; ix < R; ++ix) {
      points.push_back(plane.point(ix, iy));
      starts.push_back(unflatten(plane.latent(ix, iy), config));
    }
  }
  const std::vector<PuzzleGrid> xs(starts.size(), x);
  const std::vector<PuzzleGrid> ys(starts.size(), y);
  const auto traces = capture_traces(xs, ys, params, config, starts);
  std::vector<BasinCell> cells;
  cells.reserve(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const ReasoningTrace& t = traces[i];
    BasinCell c;
    c.px = points[i](0);
    c.py = points[i](1);
    c.steps = segments_to_correct(t);
    const Eigen::VectorXd step = t.snapshots.front() - t.initial;
    const Eigen::VectorXd arrow = plane.pca.basis.leftCols(2).transpose() * step;
    c.dx = arrow(0);
    c.dy = arrow(1);
    c.first_update_norm = step.norm();
    cells.push_back(c);
  }
  return cells;
}

EnergyLandscape energy_landscape(const PlaneGrid& plane, const ModelParams<double>& params, const ModelConfig& config,
                                 const Eigen::VectorXd* from, const Eigen::VectorXd* to, int profile_points) {
  auto energy_at = [&](const Eigen::VectorXd& z) {
    return energy(decode_output(LatentState<double>{unflatten(z, config)}, params, config).prediction);
  };
  EnergyLandscape out;
  for (int iy = 0; iy < plane.resolution; ++iy) {
    for (int ix = 0; ix < plane.resolution; ++ix) {
      const Eigen::Vector2d p = plane.point(ix, iy);
      out.field.push_back({p(0), p(1), energy_at(plane.latent(ix, iy))});
    }
  }
  if (from != nullptr && to != nullptr) {
    if (profile_points < 2) throw std::invalid_argument("energy_landscape: profile needs at least two points");
    for (int k = 0; k < profile_points; ++k) {
      const double t = static_cast<double>(k) / (profile_points - 1);
      out.profile.push_back({t, energy_at((1.0 - t) * *from + t * *to)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

SpectralEstimate spectral_norm_estimate(const LinearMap& jvp, const LinearMap& vjp, Eigen::Index dim, int iters,
                                        std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("spectral_norm_estimate: iters must be >= 1");
  if (dim < 1) throw std::invalid_argument("spectral_norm_estimate: empty dimension");
  Rng rng(derive_seed(seed, "power"));
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.normal();
  v.normalize();
  SpectralEstimate est;
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd u = jvp(v);
    if (!u.allFinite()) throw NonFiniteError("spectral_norm_estimate: non-finite Jacobian-vector product");
    est.norm = u.norm();
    est.history.push_back(est.norm);
    if (est.norm == 0.0) break;
    const Eigen::VectorXd w = vjp(u);
    if (!w.allFinite()) throw NonFiniteError("spectral_norm_estimate: non-finite vector-Jacobian product");
    const double nw = w.norm();
    if (nw == 0.0) {
      est.norm = 0.0;
      break;
    }
    v = w / nw;
  }
  if (est.norm > 0.0) {
    est.norm = jvp(v).norm();
    est.history.push_back(est.norm);
  }
  return est;
}

SpectralEstimate jacobian_probe(const Matrix<double>& z, const Matrix<double>& x_emb,
                                const ModelParams<double>& params, const ModelConfig& config, int iters,
                                double fd_step, std::uint64_t seed) {
  if (!(fd_step > 0.0)) throw std::invalid_argument("jacobian_probe: fd_step must be positive");
  const Eigen::Index D = z.size();
  auto segment = [&](const Matrix<double>& at) {
    return flatten(segment_forward(LatentState<double>{at}, x_emb, params, config).z);
  };
  const LinearMap jvp = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    const Matrix<double> dv = Eigen::Map<const Matrix<double>>(v.data(), z.rows(), z.cols());
    return (segment(z + fd_step * dv) - segment(z - fd_step * dv)) / (2.0 * fd_step);
  };
  const LinearMap vjp = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    Tape<double> tape;
    const ParamVars vars = bind_params(tape, params, false);
    const Var zin = tape.leaf(z, true);
    const Var out = segment_graph(tape, zin, tape.leaf(x_emb), vars, config);
    tape.backward(out, Eigen::Map<const Matrix<double>>(u.data(), z.rows(), z.cols()));
    return flatten(tape.grad(zin));
  };
  return spectral_norm_estimate(jvp, vjp, D, iters, seed);
}

// ---------------------------------------------------------------------------

std::string probe_kind_name(ProbeKind k) {
  switch (k) {
    case ProbeKind::FullyRevealed: return "fully-revealed";
    case ProbeKind::OneCell: return "one-cell";
    case ProbeKind::OneRow: return "one-row";
  }
  return "unknown";
}

ProbeKind probe_kind_from_name(const std::string& name) {
  for (ProbeKind k : {ProbeKind::FullyRevealed, ProbeKind::OneCell, ProbeKind::OneRow}) {
    if (probe_kind_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown probe kind '" + name + "' (expected fully-revealed, one-cell or one-row)");
}

std::vector<Probe> make_probes(std::span<const PuzzleGrid> solutions, ProbeKind kind, std::uint64_t seed) {
  std::vector<Probe> out;
  out.reserve(solutions.size());
  for (std::size_t i = 0; i < solutions.size(); ++i) {
    const PuzzleGrid& s = solutions[i];
    if (!is_valid_complete(s)) throw GridError("make_probes: solution " + std::to_string(i) + " is not a valid grid");
    PuzzleGrid puzzle = s;
    Rng rng(derive_seed(seed, probe_kind_name(kind), i));
    if (kind == ProbeKind::OneCell) {
      puzzle.set(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(s.cell_count()))), kBlank);
    } else if (kind == ProbeKind::OneRow) {
      const int row = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(s.side())));
      for (int c = 0; c < s.side(); ++c) puzzle.set(row, c, kBlank);
    }
    out.push_back({{std::move(puzzle), s}, kind});
  }
  return out;
}

StabilityReport stability_audit(const ModelParams<double>& params, std::span<const Probe> probes,
                                const ModelConfig& config) {
  std::vector<PuzzleGrid> xs;
  std::vector<PuzzleGrid> ys;
  for (const Probe& p : probes) {
    xs.push_back(p.sample.puzzle);
    ys.push_back(p.sample.solution);
  }
  RolloutOptions options;
  const auto runs = rollout<double>(xs, params, config, options, ys);
  StabilityReport report;
  report.probes = static_cast<int>(probes.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    ProbeVerdict v;
    v.kind = probes[i].kind;
    const auto& preds = runs[i].predictions;
    for (std::size_t s = 0; s < preds.size(); ++s) {
      if (preds[s] == ys[i]) {
        v.first_correct = static_cast<int>(s) + 1;
        break;
      }
    }
    v.ever_correct = v.first_correct > 0;
    v.stable = v.ever_correct;
    for (std::size_t s = v.ever_correct ? static_cast<std::size_t>(v.first_correct) : preds.size(); s < preds.size(); ++s) {
      v.stable = v.stable && preds[s] == ys[i];
    }
    report.stable += v.stable ? 1 : 0;
    report.never_correct += v.ever_correct ? 0 : 1;
    report.verdicts.push_back(v);
  }
  report.rate = report.probes > 0 ? static_cast<double>(report.stable) / report.probes : 0.0;
  return report;
}

// ---------------------------------------------------------------------------

std::string trace_to_jsonl(const ReasoningTrace& trace, bool include_snapshots) {
  std::string out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    nlohmann::json j = {{"segment", i + 1},
                        {"loss", trace.loss[i]},
                        {"energy", trace.energy[i]},
                        {"exact", static_cast<bool>(trace.exact[i])},
                        {"update_norm", trace.update_norm[i]},
                        {"q_halt", trace.q[i].q_halt},
                        {"q_continue", trace.q[i].q_continue},
                        {"prediction", serialize_grid(trace.predictions[i])}};
    if (include_snapshots) {
      j["latent"] = std::vector<double>(trace.snapshots[i].data(), trace.snapshots[i].data() + trace.snapshots[i].size());
    }
    out += j.dump() + "\n";
  }
  return out;
}

std::string basin_to_csv(const std::vector<BasinCell>& cells) {
  std::ostringstream out;
  out.precision(10);
  out << "px,py,steps,dx,dy,first_update_norm\n";
  for (const BasinCell& c : cells) {
    out << c.px << ',' << c.py << ',' << c.steps << ',' << c.dx << ',' << c.dy << ',' << c.first_update_norm << '\n';
  }
  return out.str();
}

std::string landscape_to_csv(const EnergyLandscape& landscape) {
  std::ostringstream out;
  out.precision(10);
  out << "px,py,energy\n";
  for (const LandscapeCell& c : landscape.field) out << c.px << ',' << c.py << ',' << c.energy << '\n';
  return out.str();
}

std::string profile_to_csv(const EnergyLandscape& landscape) {
  std::ostringstream out;
  out.precision(10);
  out << "t,energy\n";
  for (const ProfilePoint& p : landscape.profile) out << p.t << ',' << p.energy << '\n';
  return out.str();
}

nlohmann::json stability_to_json(const StabilityReport& report) {
  nlohmann::json verdicts = nlohmann::json::array();
  for (const ProbeVerdict& v : report.verdicts) {
    verdicts.push_back({{"kind", probe_kind_name(v.kind)},
                        {"stable", v.stable},
                        {"ever_correct", v.ever_correct},
                        {"first_correct", v.first_correct}});
  }
  return {{"rate", report.rate},
          {"probes", report.probes},
          {"stable", report.stable},
          {"never_correct", report.never_correct},
          {"verdicts", verdicts}};
}

}  // namespace hrm
