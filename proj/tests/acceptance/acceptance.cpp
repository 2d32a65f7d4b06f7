// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "../support/analysis_oracles.hpp"
#include "../support/gradient_suite.hpp"
#include "../support/training_oracle.hpp"
#include "hrm/analysis.hpp"
#include "hrm/checkpoint.hpp"
#include "hrm/dataset.hpp"
#include "hrm/pipeline.hpp"
#include "hrm/rng.hpp"
#include "hrm/solver.hpp"
#include "hrm/symmetry.hpp"

using namespace hrm;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Verdict> g_verdicts;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  g_verdicts.push_back({id, name, pass, detail});
  std::cout << "criterion " << id << " [" << (pass ? "PASS" : "FAIL") << "] " << name << ": " << detail << std::endl;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

void gradients() {
  const auto t0 = Clock::now();
  const auto cases = testing::run_gradient_suite(20, 1e-4);
  std::map<std::string, int> per_op;
  double worst = 0.0;
  int failed = 0;
  for (const auto& c : cases) {
    const std::string family = c.op.substr(0, c.op.find('/'));
    ++per_op[family];
    worst = std::max(worst, c.max_rel_error);
    failed += c.passed ? 0 : 1;
  }
  int fewest = cases.empty() ? 0 : std::numeric_limits<int>::max();
  for (const auto& [op, n] : per_op) fewest = std::min(fewest, n);
  const bool has_composite = std::any_of(cases.begin(), cases.end(), [](const auto& c) {
    return c.op.rfind("composite", 0) == 0;
  });
  report(1, "gradient correctness", failed == 0 && fewest >= 20 && has_composite,
         std::to_string(cases.size()) + " checks over " + std::to_string(per_op.size()) + " ops, >= " +
             std::to_string(fewest) + " per op, max rel error " + fmt(worst, 3) + " (tol 1e-4), " +
             std::to_string(failed) + " failed, " + fmt(seconds_since(t0), 3) + " s");
}

void one_step() {
  const auto t0 = Clock::now();
  const auto main = testing::one_step_gradient_oracle(8, 3, 4, 11);
  const auto deep = testing::one_step_gradient_oracle(8, 6, 4, 11);
  const std::set<std::size_t> nodes(deep.tape_nodes.begin(), deep.tape_nodes.end());
  const bool linear = nodes.size() == 1 && main.tape_nodes.front() == deep.tape_nodes.front() &&
                      main.peak_live_nodes == deep.peak_live_nodes &&
                      deep.peak_live_nodes <= 2 * deep.tape_nodes.front();
  const bool exact = main.max_grad_diff < 1e-10 && main.max_state_diff < 1e-10 && main.max_target_diff < 1e-12;
  report(2, "one-step gradient", exact && linear && main.max_grad_scale > 0.0,
         "max |grad - oracle| " + fmt(main.max_grad_diff, 3) + " (tol 1e-10, largest entry " +
             fmt(main.max_grad_scale, 3) + "), nodes per segment " + std::to_string(main.tape_nodes.front()) +
             " at M=3 and M=6, peak live " + std::to_string(main.peak_live_nodes) + " vs " +
             std::to_string(deep.peak_live_nodes) + ", " + fmt(seconds_since(t0), 3) + " s");
}

int enumerate_4x4() {
  std::vector<std::vector<int>> perms;
  std::vector<int> p{1, 2, 3, 4};
  do perms.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  int count = 0;
  for (const auto& a : perms)
    for (const auto& b : perms)
      for (const auto& c : perms)
        for (const auto& d : perms) {
          std::vector<Token> cells;
          for (const auto* row : {&a, &b, &c, &d})
            for (int v : *row) cells.push_back(static_cast<Token>(v));
          count += is_valid_complete(PuzzleGrid(2, cells)) ? 1 : 0;
        }
  return count;
}

void sudoku() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  int energy_ok = 0;
  int corrupt_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = i % 2 == 0 ? 2 : 3;
    const PuzzleGrid g = random_solution(rng, n);
    energy_ok += (energy(g) == 0 && is_valid_complete(g)) ? 1 : 0;
    PuzzleGrid bad = g;
    const int cell = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(g.cell_count())));
    const int shift = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(g.side() - 1)));
    bad.set(cell, static_cast<Token>((g[cell] - 1 + shift) % g.side() + 1));
    corrupt_ok += (energy(bad) > 0 && !is_valid_complete(bad)) ? 1 : 0;
  }
  const auto counted = solve_count(PuzzleGrid(2), 1000).solution_count;
  const int enumerated = enumerate_4x4();

  int unique = 0;
  int checked = 0;
  const Dataset base = generate_dataset(7, 2, 200, 4);
  const Dataset mixed = build_mixed_dataset(base, 4, RevealDistribution{}, 8);
  const Dataset big = generate_dataset(9, 3, 5, 30);
  for (const Dataset* d : {&base, &mixed, &big}) {
    for (const Sample& s : *d) {
      const SolveReport r = solve_count(s.puzzle, 2);
      unique += (r.solution_count == 1 && r.first_solution == s.solution) ? 1 : 0;
      ++checked;
    }
  }
  const bool pass = energy_ok == 1000 && corrupt_ok == 1000 && counted == 288 && enumerated == 288 && unique == checked;
  report(3, "sudoku oracles", pass,
         "energy 0 on " + std::to_string(energy_ok) + "/1000 valid grids, > 0 on " + std::to_string(corrupt_ok) +
             "/1000 corruptions; blank 4x4 solve_count " + std::to_string(counted) + ", enumeration " +
             std::to_string(enumerated) + "; " + std::to_string(unique) + "/" + std::to_string(checked) +
             " generated and simplified puzzles unique, " + fmt(seconds_since(t0), 3) + " s");
}

void symmetry() {
  const auto t0 = Clock::now();
  Rng rng(77);
  int round = 0;
  int compose = 0;
  int transport = 0;
  const Dataset small = generate_dataset(3, 2, 50, 4);
  for (int i = 0; i < 1000; ++i) {
    const int n = i % 4 == 3 ? 3 : 2;
    const PuzzleGrid g = random_solution(rng, n);
    const GridTransform t = random_transform(rng, n);
    const GridTransform u = random_transform(rng, n);
    round += apply_transform(invert_transform(t), apply_transform(t, g)) == g ? 1 : 0;
    compose += apply_transform(compose_transform(t, u), g) == apply_transform(t, apply_transform(u, g)) ? 1 : 0;
    const Sample& s = small[static_cast<std::size_t>(i) % small.size()];
    const GridTransform v = random_transform(rng, 2);
    const SolveReport r = solve_count(apply_transform(v, s.puzzle), 2);
    transport += (r.solution_count == 1 && r.first_solution == apply_transform(v, s.solution)) ? 1 : 0;
  }
  report(4, "symmetry group laws", round == 1000 && compose == 1000 && transport == 1000,
         "round trip " + std::to_string(round) + "/1000, composition " + std::to_string(compose) +
             "/1000, solution transport " + std::to_string(transport) + "/1000, " + fmt(seconds_since(t0), 3) + " s");
}

// ---------------------------------------------------------------------------

struct DeskRun {
  PipelineResult result;
  std::map<std::string, double> train_seconds;
  fs::path dir;
  ExperimentConfig config;
};

DeskRun desk_pipeline(const fs::path& out, std::int64_t steps) {
  DeskRun run;
  run.dir = out / "desk";
  fs::remove_all(run.dir);
  ExperimentConfig& c = run.config;
  c.seed = 1;
  c.model = ModelConfig::desk_scale();
  c.train.total_steps = steps;
  c.train.checkpoint_interval = std::max<std::int64_t>(1, steps / 20);
  c.train.log_interval = 50;
  c.train.mix_replicates = 4;
  c.train_count = 500;
  c.eval_count = 200;
  c.clues = 4;
  c.bootstrap_count = 10;
  c.relabel_k = 9;
  std::string current;
  Clock::time_point started{};
  run.result = run_pipeline(c, run.dir, "acceptance", [&](const std::string& msg) {
    if (msg.rfind("training ", 0) == 0 || msg.rfind("analyzing ", 0) == 0) {
      const std::string name = msg.substr(msg.find(' ') + 1, msg.find(' ', msg.find(' ') + 1) - msg.find(' ') - 1);
      if (msg.rfind("training ", 0) == 0) {
        current = name;
        started = Clock::now();
      } else {
        run.train_seconds[name] = seconds_since(started);
      }
      std::cerr << msg << std::endl;
    } else if (msg.find("\"step\"") != std::string::npos) {
      const auto line = nlohmann::json::parse(msg.substr(msg.find('{')));
      if (line.at("step").get<std::int64_t>() % 500 == 0) std::cerr << msg << std::endl;
    }
  });
  return run;
}

const AblationRow* row(const EvalReport& r, const std::string& label) {
  for (const auto& x : r.rows)
    if (x.label == label) return &x;
  return nullptr;
}

void desk_training(const DeskRun& run) {
  const RunSummary& mixed = run.result.runs.back();
  const AblationRow* act = row(run.result.report, "+Data Mixing");
  const double acc = act ? act->accuracy() : 0.0;
  const double secs = run.train_seconds.count("mixed") ? run.train_seconds.at("mixed") : -1.0;
  const bool in_budget = secs >= 0.0 && secs <= 1800.0;
  bool monotone = true;
  for (std::size_t i = 0; i + 1 < mixed.segment_loss.size(); ++i) {
    monotone = monotone && mixed.segment_loss[i + 1] <= mixed.segment_loss[i] * 1.05;
  }
  std::string losses;
  for (double l : mixed.segment_loss) losses += (losses.empty() ? "" : " ") + fmt(l, 3);
  const bool primary = acc >= 0.90 && in_budget;
  report(5, "desk-scale training", primary || (in_budget && monotone),
         "exact accuracy " + fmt(acc, 3) + " on " + std::to_string(act ? act->total : 0) +
             " held-out puzzles (target 0.90; last-segment " + fmt(mixed.final_accuracy, 3) + "), training " +
             fmt(secs, 4) + " s (budget 1800 s); per-segment eval loss [" + losses + "] " +
             (monotone ? "non-increasing within 5%" : "not monotone") + (primary ? "" : "; judged on the fallback"));
}

void fixed_point_restoration(const DeskRun& run) {
  if (run.result.runs.size() < 2) {
    report(6, "fixed-point restoration", false, "unmixed run missing");
    return;
  }
  const RunSummary& plain = run.result.runs.front();
  const RunSummary& mixed = run.result.runs.back();
  const bool full = mixed.fully_revealed.rate > plain.fully_revealed.rate;
  const bool cell = mixed.one_cell.rate > plain.one_cell.rate;
  const bool floor = mixed.fully_revealed.rate >= 0.95;
  report(6, "fixed-point restoration", full && cell && floor,
         "fully-revealed stability mixed " + fmt(mixed.fully_revealed.rate, 3) + " vs unmixed " +
             fmt(plain.fully_revealed.rate, 3) + ", one-blank mixed " + fmt(mixed.one_cell.rate, 3) + " vs unmixed " +
             fmt(plain.one_cell.rate, 3) + " (strictly higher required; mixed fully-revealed >= 0.95)");
}

void ablation(const DeskRun& run, const fs::path& out) {
  const EvalReport& r = run.result.report;
  std::cout << render_table(r);
  write_text_file(out / "ablation.csv", report_to_csv(r));
  const AblationRow* base = row(r, "Baseline");
  const AblationRow* boot = row(r, "+Bootstrap");
  const AblationRow* relabel = row(r, "+Relabel");
  const AblationRow* mix = row(r, "+Data Mixing");
  const AblationRow* all = row(r, "+All");
  if (!base || !boot || !relabel || !mix || !all) {
    report(7, "guess-scaling ablation", false, "missing ablation rows");
    return;
  }
  const double best = std::max({boot->accuracy(), relabel->accuracy(), mix->accuracy()});
  const bool pass = relabel->accuracy() >= base->accuracy() && boot->accuracy() >= base->accuracy() &&
                    all->accuracy() >= best && base->total >= 200 && r.rows.size() == 7;
  int fallbacks = 0;
  for (const auto& x : r.rows) fallbacks += x.fallbacks;
  report(7, "guess-scaling ablation", pass,
         "baseline " + fmt(base->accuracy(), 3) + ", +relabel(k=" + std::to_string(relabel->pool_size) + ") " +
             fmt(relabel->accuracy(), 3) + ", +bootstrap(" + std::to_string(boot->pool_size) + ") " +
             fmt(boot->accuracy(), 3) + ", +data mixing " + fmt(mix->accuracy(), 3) + ", +all " +
             fmt(all->accuracy(), 3) + " over " + std::to_string(base->total) + " samples, " +
             std::to_string(r.rows.size()) + " rows, " + std::to_string(fallbacks) + " unhalted-pool fallbacks");
}

void analysis_toolkit(const DeskRun* run) {
  const auto t0 = Clock::now();
  // PCA against the Jacobi oracle, on random points and on real trajectories.
  double pca_err = 0.0;
  Rng rng(5);
  Eigen::MatrixXd pts(40, 6);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal() * (1.0 + static_cast<double>(i % 6));
  {
    const PcaResult p = pca_points(pts, 3);
    const Eigen::MatrixXd X = pts.rowwise() - pts.colwise().mean();
    const auto [vals, vecs] = testing::jacobi_eigen(X.transpose() * X / 39.0);
    for (int k = 0; k < 3; ++k) {
      pca_err = std::max(pca_err, 1.0 - std::abs(p.basis.col(k).dot(vecs.col(k))));
      pca_err = std::max(pca_err, std::abs(p.explained_variance(k) - vals(k)) / vals(k));
    }
  }

  ModelConfig config;
  ModelParams<double> params;
  Dataset eval;
  if (run != nullptr) {
    const std::string last = run->result.runs.back().checkpoints.back();
    const Checkpoint ck = load_checkpoint(run->dir / last);
    config = ck.config;
    params = ck.params.cast<double>();
    eval = read_dataset(run->dir / "data" / "eval.jsonl");
  } else {
    config.width = 16;
    config.heads = 2;
    config.max_segments = 4;
    params = init_params<double>(config);
    eval = generate_dataset(4, 2, 16, 4);
  }
  std::vector<PuzzleGrid> xs;
  std::vector<PuzzleGrid> ys;
  for (std::size_t i = 0; i < std::min<std::size_t>(16, eval.size()); ++i) {
    xs.push_back(eval[i].puzzle);
    ys.push_back(eval[i].solution);
  }
  const auto traces = capture_traces(xs, ys, params, config);
  const PcaResult pca = pca_project(traces, 2);
  {
    // Oracle through the snapshot Gram matrix, solved by Jacobi.
    Eigen::MatrixXd snaps(static_cast<Eigen::Index>(traces.size() * traces[0].size()), traces[0].snapshots[0].size());
    Eigen::Index r = 0;
    for (const auto& t : traces)
      for (const auto& s : t.snapshots) snaps.row(r++) = s.transpose();
    const Eigen::MatrixXd X = snaps.rowwise() - snaps.colwise().mean();
    const auto [vals, vecs] = testing::jacobi_eigen(X * X.transpose() / static_cast<double>(X.rows() - 1));
    for (int k = 0; k < 2; ++k) {
      const Eigen::VectorXd dir = (X.transpose() * vecs.col(k)).normalized();
      pca_err = std::max(pca_err, 1.0 - std::abs(pca.basis.col(k).dot(dir)));
      pca_err = std::max(pca_err, std::abs(pca.explained_variance(k) - vals(k)) / vals(k));
    }
  }
  const bool pca_ok = pca_err < 1e-6;

  int modes_ok = 0;
  std::map<Mode, int> per_mode;
  for (const auto& c : testing::mode_fixture()) {
    const Mode m = classify_mode(c.trace).mode;
    modes_ok += m == c.mode ? 1 : 0;
    ++per_mode[c.mode];
  }
  const bool modes_pass = modes_ok == 12 && per_mode.size() == 4 &&
                          std::all_of(per_mode.begin(), per_mode.end(), [](const auto& kv) { return kv.second == 3; });

  const PlaneGrid plane = plane_from_pca(pca, 41);
  const auto basin = basin_map(xs[0], ys[0], params, config, plane);
  bool basin_ok = basin.size() == 41 * 41;
  for (const auto& b : basin) {
    basin_ok = basin_ok && std::isfinite(b.dx) && std::isfinite(b.dy) &&
               (b.steps == -1 || (b.steps >= 1 && b.steps <= config.max_segments));
  }
  const EnergyLandscape land = energy_landscape(plane, params, config);
  bool land_ok = land.field.size() == 41 * 41;
  for (const auto& c : land.field) land_ok = land_ok && c.energy >= 0;
  int true_fixed = 0;
  int zero_energy = 0;
  for (const auto& t : traces) {
    const auto fp = detect_fixed_point(t);
    if (!fp || !fp->is_true) continue;
    ++true_fixed;
    const Eigen::VectorXd& z = t.snapshots.back();
    const Matrix<double> latent = Eigen::Map<const Matrix<double>>(z.data(), config.seq_len(), config.width);
    zero_energy += energy(decode_output(LatentState<double>{latent}, params, config).prediction) == 0 ? 1 : 0;
  }
  const bool fixed_ok = true_fixed > 0 && zero_energy == true_fixed;
  report(8, "analysis toolkit", pca_ok && modes_pass && basin_ok && land_ok && fixed_ok,
         "PCA max deviation from oracle " + fmt(pca_err, 3) + " (tol 1e-6); modes " + std::to_string(modes_ok) +
             "/12; basin " + std::to_string(basin.size()) + " cells " + (basin_ok ? "well-formed" : "malformed") +
             "; landscape " + std::to_string(land.field.size()) + " cells " + (land_ok ? "well-formed" : "malformed") +
             "; energy 0 at " + std::to_string(zero_energy) + "/" + std::to_string(true_fixed) +
             " detected true fixed points; " + fmt(seconds_since(t0), 3) + " s");
}

void determinism(const fs::path& out) {
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.seed = 3;
  c.model.width = 16;
  c.model.heads = 2;
  c.model.max_segments = 3;
  c.train.total_steps = 20;
  c.train.batch_size = 8;
  c.train.checkpoint_interval = 5;
  c.train.log_interval = 5;
  c.train.mix_replicates = 2;
  c.train_count = 24;
  c.eval_count = 12;
  c.bootstrap_count = 3;
  c.relabel_k = 3;
  const fs::path a = out / "determinism_a";
  const fs::path b = out / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  run_pipeline(c, a, "acceptance");
  run_pipeline(c, b, "acceptance");
  int files = 0;
  int same = 0;
  int checkpoints = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(e.path(), a);
    checkpoints += rel.extension() == ".bin" ? 1 : 0;
    same += fs::exists(b / rel) && read_text_file(e.path()) == read_text_file(b / rel) ? 1 : 0;
  }
  int files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) files_b += e.is_regular_file() ? 1 : 0;
  report(9, "determinism", files > 0 && same == files && files_b == files && checkpoints > 0,
         std::to_string(same) + "/" + std::to_string(files) + " files byte-identical (" + std::to_string(checkpoints) +
             " checkpoints, reports and logs), " + fmt(seconds_since(t0), 3) + " s");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run"};
  std::string out = "acceptance_out";
  std::vector<int> only;
  std::int64_t steps = 3000;
  app.add_option("--out", out, "Working directory for generated artifacts")->capture_default_str();
  app.add_option("--only", only, "Criteria to run (default all)");
  app.add_option("--steps", steps, "Desk-scale training steps")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  const fs::path dir = out;
  fs::create_directories(dir);
  auto want = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

  try {
    if (want(1)) gradients();
    if (want(2)) one_step();
    if (want(3)) sudoku();
    if (want(4)) symmetry();
    std::optional<DeskRun> desk;
    if (want(5) || want(6) || want(7)) {
      const auto t0 = Clock::now();
      desk = desk_pipeline(dir, steps);
      std::cerr << "desk-scale pipeline finished in " << fmt(seconds_since(t0), 5) << " s" << std::endl;
      if (want(5)) desk_training(*desk);
      if (want(6)) fixed_point_restoration(*desk);
      if (want(7)) ablation(*desk, dir);
    }
    if (want(8)) analysis_toolkit(desk ? &*desk : nullptr);
    if (want(9)) determinism(dir);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }

  nlohmann::json summary = nlohmann::json::array();
  int failed = 0;
  for (const Verdict& v : g_verdicts) {
    summary.push_back({{"criterion", v.id}, {"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
    failed += v.pass ? 0 : 1;
  }
  write_text_file(dir / "acceptance.json", summary.dump(1) + "\n");
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
