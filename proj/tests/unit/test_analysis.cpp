#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../support/analysis_oracles.hpp"
#include "hrm/analysis.hpp"
#include "hrm/errors.hpp"
#include "hrm/inference.hpp"
#include "hrm/rng.hpp"

using namespace hrm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.width = 8;
  c.heads = 2;
  c.n_cycles = 1;
  c.t_low = 2;
  c.max_segments = 4;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("PCA matches an independent eigensolver") {
  // Tall case: more points than dimensions; wide case: the reverse.
  for (auto [rows, cols] : {std::pair<int, int>{40, 6}, std::pair<int, int>{5, 9}}) {
    MatrixXd pts = random_matrix(rows, cols, static_cast<std::uint64_t>(rows));
    pts.col(0) *= 4.0;
    pts.col(1) *= 2.0;
    const PcaResult pca = pca_points(pts, 3);
    const MatrixXd centered = pts.rowwise() - pts.colwise().mean();
    const auto [values, vectors] = testing::jacobi_eigen(centered.transpose() * centered / (rows - 1));
    for (int k = 0; k < 3; ++k) {
      CHECK(pca.explained_variance(k) == doctest::Approx(values(k)).epsilon(1e-9));
      const double align = std::abs(pca.basis.col(k).dot(vectors.col(k)));
      CHECK(align == doctest::Approx(1.0).epsilon(1e-6));
      Eigen::Index peak = 0;
      pca.basis.col(k).cwiseAbs().maxCoeff(&peak);
      CHECK(pca.basis(peak, k) > 0.0);
    }
    CHECK((pca.basis.transpose() * pca.basis - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((pca.coords[0] - centered * pca.basis).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("PCA reconstructs points on a plane") {
  const MatrixXd frame = random_matrix(10, 2, 8).householderQr().householderQ() * MatrixXd::Identity(10, 2);
  const VectorXd offset = random_matrix(10, 1, 9).col(0);
  const MatrixXd weights = random_matrix(30, 2, 10);
  MatrixXd pts(30, 10);
  for (int i = 0; i < 30; ++i) pts.row(i) = (offset + frame * weights.row(i).transpose()).transpose();
  const PcaResult pca = pca_points(pts, 2);
  for (int i = 0; i < 30; ++i) {
    const VectorXd z = pts.row(i).transpose();
    CHECK((unproject(pca, project(pca, z)) - z).norm() < 1e-9);
  }

  // Traces are stacked, then split back per trace.
  std::vector<ReasoningTrace> traces(2);
  for (int i = 0; i < 30; ++i) traces[static_cast<std::size_t>(i % 2)].snapshots.push_back(pts.row(i).transpose());
  const PcaResult joint = pca_project(traces, 2);
  REQUIRE(joint.coords.size() == 2);
  CHECK(joint.coords[0].rows() == 15);
  CHECK((joint.coords[1].row(0).transpose() - project(joint, pts.row(1).transpose())).norm() < 1e-9);

  CHECK_THROWS_AS(pca_points(MatrixXd::Ones(5, 3), 2), std::invalid_argument);
  CHECK_THROWS_AS(pca_points(MatrixXd::Ones(1, 3), 2), std::invalid_argument);
  CHECK_THROWS_AS(pca_points(pts, 11), std::invalid_argument);
}

TEST_CASE("fixed point detection") {
  const VectorXd a = testing::vec4(1, 2, 3, 4);
  const VectorXd b = testing::vec4(-1, 0, 3, 1);
  const auto constant = detect_fixed_point(testing::synthetic_trace({a, a, a, a}, {true, true, true}));
  REQUIRE(constant.has_value());
  CHECK(constant->segment == 0);
  CHECK(constant->is_true);
  CHECK(constant->max_relative_update == 0.0);

  CHECK_FALSE(detect_fixed_point(testing::synthetic_trace({a, b, a, b, a}, {false, false, false, false})).has_value());

  const auto late = detect_fixed_point(testing::synthetic_trace({b, a, b, a, a, a}, {false, false, false, false, false}));
  REQUIRE(late.has_value());
  CHECK(late->segment == 3);
  CHECK_FALSE(late->is_true);
  CHECK(late->energy == 2);

  // Tiny relative moves count as fixed; the tolerance is relative to |z|.
  const VectorXd a2 = a * (1.0 + 1e-5);
  CHECK(detect_fixed_point(testing::synthetic_trace({b, a, a2, a}, {false, false, false})).value().segment == 1);
  CHECK_FALSE(detect_fixed_point(testing::synthetic_trace({b, a, a2, a}, {false, false, false}), 1e-7).has_value());
}

TEST_CASE("reasoning modes on synthetic traces") {
  const auto cases = testing::mode_fixture();
  REQUIRE(cases.size() == 12);
  int idx = 0;
  for (const auto& c : cases) {
    INFO("case " << idx++);
    CHECK(classify_mode(c.trace).mode == c.mode);
  }
  const ModeLabel plateau = classify_mode(cases[4].trace);
  CHECK(plateau.first_correct == 5);
  CHECK(plateau.plateau == 3);
  CHECK(mode_name(Mode::NontrivialFailure) == "nontrivial_failure");
  CHECK(segments_to_correct(cases[5].trace) == 5);
  CHECK(segments_to_correct(cases[0].trace) == 1);
  CHECK(segments_to_correct(cases[7].trace) == -1);
}

TEST_CASE("spectral norm by power iteration") {
  const LinearMap identity = [](const VectorXd& v) { return v; };
  CHECK(spectral_norm_estimate(identity, identity, 12, 20, 1).norm == doctest::Approx(1.0).epsilon(1e-9));
  const LinearMap zero = [](const VectorXd& v) { return VectorXd(VectorXd::Zero(v.size())); };
  CHECK(spectral_norm_estimate(zero, zero, 12, 20, 1).norm == doctest::Approx(0.0));

  const MatrixXd a = random_matrix(9, 9, 21);
  const LinearMap fwd = [&](const VectorXd& v) -> VectorXd { return a * v; };
  const LinearMap back = [&](const VectorXd& v) -> VectorXd { return a.transpose() * v; };
  const double truth = Eigen::JacobiSVD<MatrixXd>(a).singularValues()(0);
  const SpectralEstimate est = spectral_norm_estimate(fwd, back, 9, 300, 2);
  CHECK(est.norm == doctest::Approx(truth).epsilon(1e-4));
  CHECK(est.history.size() == 301);  // plus the final re-evaluation
  CHECK(est.norm <= truth * (1.0 + 1e-9));
}

TEST_CASE("Jacobian probe agrees with a dense finite-difference Jacobian") {
  const ModelConfig c = tiny_config();
  const auto params = init_params<double>(c);
  const PuzzleGrid x = parse_grid("1..4.4..2......1", 2);
  const Matrix<double> emb = embed_input(x, params, c);
  const Matrix<double> z = segment_forward(initial_state(params, c), emb, params, c).z;
  const Eigen::Index D = z.size();
  MatrixXd jac(D, D);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < D; ++k) {
    Matrix<double> up = z;
    Matrix<double> down = z;
    up.data()[k] += h;
    down.data()[k] -= h;
    const Matrix<double> diff = (segment_forward(LatentState<double>{up}, emb, params, c).z -
                                 segment_forward(LatentState<double>{down}, emb, params, c).z) /
                                (2 * h);
    jac.col(k) = Eigen::Map<const VectorXd>(diff.data(), D);
  }
  const double truth = Eigen::JacobiSVD<MatrixXd>(jac).singularValues()(0);
  const SpectralEstimate est = jacobian_probe(z, emb, params, c, 200);
  CHECK(est.norm == doctest::Approx(truth).epsilon(1e-3));
  CHECK_THROWS_AS(jacobian_probe(z, emb, params, c, 5, 0.0), std::invalid_argument);
}

TEST_CASE("captured traces agree with the rollout") {
  const ModelConfig c = tiny_config();
  const auto params = init_params<double>(c);
  const Dataset data = generate_dataset(5, 2, 3, 6);
  const ReasoningTrace t = capture_trace(data[0].puzzle, data[0].solution, params, c);
  REQUIRE(t.size() == 4);
  RolloutOptions keep;
  keep.keep_states = true;
  const auto r = rollout<double>(std::span<const PuzzleGrid>(&data[0].puzzle, 1), params, c, keep,
                                 std::span<const PuzzleGrid>(&data[0].solution, 1));
  const VectorXd* prev = &t.initial;
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(t.predictions[i] == r[0].predictions[i]);
    CHECK(t.energy[i] == energy(t.predictions[i]));
    CHECK(t.exact[i] == (t.predictions[i] == data[0].solution));
    CHECK(t.loss[i] == doctest::Approx(r[0].loss[i]));
    CHECK(t.update_norm[i] == doctest::Approx((t.snapshots[i] - *prev).norm()));
    prev = &t.snapshots[i];
  }
  CHECK(t.initial.size() == c.seq_len() * c.width);

  // Starting from a later state continues the same trajectory.
  const Matrix<double> start = r[0].states[1];
  const ReasoningTrace cont = capture_trace(data[0].puzzle, data[0].solution, params, c, &start);
  CHECK((cont.snapshots[0] - t.snapshots[2]).norm() < 1e-10);

  const auto lines = trace_to_jsonl(t);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 4);
}

TEST_CASE("basin and landscape maps") {
  ModelConfig c = tiny_config();
  c.max_segments = 3;
  const auto params = init_params<double>(c);
  const Dataset data = generate_dataset(6, 2, 3, 6);
  std::vector<ReasoningTrace> traces;
  for (const Sample& s : data) traces.push_back(capture_trace(s.puzzle, s.solution, params, c));
  const PcaResult pca = pca_project(traces, 2);
  const PlaneGrid plane = plane_from_pca(pca, 41);
  CHECK(plane.point(0, 0)(0) < plane.point(40, 0)(0));
  CHECK((plane.point(20, 20) - plane.center).norm() < 1e-12);

  PlaneGrid coarse = plane;
  coarse.resolution = 5;
  const auto basin = basin_map(data[0].puzzle, data[0].solution, params, c, coarse);
  REQUIRE(basin.size() == 25);
  for (int iy = 0; iy < 5; ++iy) {
    for (int ix = 0; ix < 5; ++ix) {
      const BasinCell& cell = basin[static_cast<std::size_t>(iy * 5 + ix)];
      CHECK(cell.px == doctest::Approx(coarse.point(ix, iy)(0)));
      CHECK(cell.py == doctest::Approx(coarse.point(ix, iy)(1)));
      CHECK((cell.steps == -1 || (cell.steps >= 1 && cell.steps <= 3)));
    }
  }
  const VectorXd corner = coarse.latent(4, 0);
  const Matrix<double> start = Eigen::Map<const Matrix<double>>(corner.data(), c.seq_len(), c.width);
  const ReasoningTrace from_corner = capture_trace(data[0].puzzle, data[0].solution, params, c, &start);
  CHECK(basin[4].steps == segments_to_correct(from_corner));
  CHECK(basin[4].first_update_norm == doctest::Approx(from_corner.update_norm[0]));
  const VectorXd moved = project(pca, from_corner.snapshots[0]) - project(pca, corner);
  CHECK(basin[4].dx == doctest::Approx(moved(0)));
  CHECK(basin[4].dy == doctest::Approx(moved(1)));

  const VectorXd a = traces[0].snapshots.back();
  const VectorXd b = traces[1].snapshots.back();
  const EnergyLandscape land = energy_landscape(plane, params, c, &a, &b, 11);
  REQUIRE(land.field.size() == 41 * 41);
  REQUIRE(land.profile.size() == 11);
  for (const auto& cell : land.field) CHECK(cell.energy >= 0);
  const VectorXd mid = plane.latent(7, 30);
  const Matrix<double> m = Eigen::Map<const Matrix<double>>(mid.data(), c.seq_len(), c.width);
  CHECK(land.field[30 * 41 + 7].energy == energy(decode_output(LatentState<double>{m}, params, c).prediction));
  CHECK(land.profile.front().t == 0.0);
  CHECK(land.profile.back().t == 1.0);
  CHECK(land.profile.front().energy == traces[0].energy.back());
  CHECK(land.profile.back().energy == traces[1].energy.back());

  const std::string csv = landscape_to_csv(land);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 41 * 41 + 1);
  const std::string bcsv = basin_to_csv(basin);
  CHECK(std::count(bcsv.begin(), bcsv.end(), '\n') == 26);
}

TEST_CASE("stability probes and audit") {
  const Dataset data = generate_dataset(7, 2, 6, 6);
  std::vector<PuzzleGrid> solutions;
  for (const Sample& s : data) solutions.push_back(s.solution);
  const auto full = make_probes(solutions, ProbeKind::FullyRevealed, 1);
  const auto cell = make_probes(solutions, ProbeKind::OneCell, 1);
  const auto row = make_probes(solutions, ProbeKind::OneRow, 1);
  for (std::size_t i = 0; i < solutions.size(); ++i) {
    CHECK(full[i].sample.puzzle == solutions[i]);
    CHECK(cell[i].sample.puzzle.blank_count() == 1);
    CHECK(row[i].sample.puzzle.blank_count() == 4);
    int blank_row = -1;
    for (int k = 0; k < 16; ++k) {
      if (row[i].sample.puzzle[k] == kBlank) {
        if (blank_row < 0) blank_row = k / 4;
        CHECK(k / 4 == blank_row);
      }
    }
    CHECK(cell[i].sample.solution == solutions[i]);
  }
  CHECK(make_probes(solutions, ProbeKind::OneCell, 1)[3].sample.puzzle == cell[3].sample.puzzle);
  CHECK(probe_kind_from_name("one-row") == ProbeKind::OneRow);
  CHECK_THROWS_AS(probe_kind_from_name("two-rows"), std::invalid_argument);
  CHECK_THROWS_AS(make_probes(std::vector<PuzzleGrid>{data[0].puzzle}, ProbeKind::OneCell, 1), GridError);

  // Verdicts recomputed from the raw prediction sequence.
  const ModelConfig c = tiny_config();
  const auto params = init_params<double>(c);
  std::vector<Probe> probes = full;
  probes.insert(probes.end(), cell.begin(), cell.end());
  const StabilityReport report = stability_audit(params, probes, c);
  CHECK(report.probes == 12);
  int stable = 0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const ReasoningTrace t = capture_trace(probes[i].sample.puzzle, probes[i].sample.solution, params, c);
    const auto first = std::find(t.exact.begin(), t.exact.end(), true);
    const bool ever = first != t.exact.end();
    const bool keeps = ever && std::all_of(first, t.exact.end(), [](bool e) { return e; });
    CHECK(report.verdicts[i].ever_correct == ever);
    CHECK(report.verdicts[i].stable == keeps);
    stable += keeps ? 1 : 0;
  }
  CHECK(report.stable == stable);
  CHECK(report.rate == doctest::Approx(stable / 12.0));
  CHECK(stability_to_json(report).at("probes") == 12);
}
