#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cctype>

#include <json.hpp>

#include "hrm/analysis.hpp"
#include "hrm/checkpoint.hpp"
#include "hrm/dataset.hpp"
#include "hrm/errors.hpp"
#include "hrm/inference.hpp"
#include "hrm/pipeline.hpp"
#include "hrm/rng.hpp"
#include "hrm/solver.hpp"
#include "hrm/symmetry.hpp"
#include "hrm/training.hpp"

namespace py = pybind11;
using namespace hrm;

namespace {

// Dicts cross the boundary as JSON text.
nlohmann::json to_json(const py::object& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object from_json(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

int box_of(const std::string& text) {
  int cells = 0;
  for (char c : text) cells += std::isspace(static_cast<unsigned char>(c)) ? 0 : 1;
  for (int n = PuzzleGrid::kMinBox; n <= 5; ++n) {
    if (n * n * n * n == cells) return n;
  }
  throw GridError("grid text has " + std::to_string(cells) + " cells, which is not n^4 for a supported n");
}

PuzzleGrid grid(const std::string& text) { return parse_grid(text, box_of(text)); }

using Pair = std::pair<std::string, std::string>;

std::vector<Pair> to_pairs(const Dataset& d) {
  std::vector<Pair> out;
  for (const Sample& s : d) out.emplace_back(serialize_grid(s.puzzle), serialize_grid(s.solution));
  return out;
}

Dataset from_pairs(const std::vector<Pair>& pairs) {
  Dataset d;
  for (const auto& [p, s] : pairs) d.push_back({grid(p), grid(s)});
  return d;
}

py::dict pass_dict(const PassResult& p) {
  py::dict d;
  d["prediction"] = serialize_grid(p.prediction);
  d["halted"] = p.halted;
  d["segments_used"] = p.segments_used;
  d["energy"] = p.energy;
  return d;
}

py::dict vote_dict(const VoteReport& r) {
  py::dict d;
  d["prediction"] = serialize_grid(r.outcome.prediction);
  d["votes"] = r.outcome.votes;
  d["halted"] = r.outcome.halted;
  d["fallback"] = r.outcome.fallback;
  py::list pool;
  for (const PassResult& p : r.pool) pool.append(pass_dict(p));
  d["pool"] = pool;
  return d;
}

// A loaded checkpoint with inference helpers.
struct Model {
  Checkpoint ckpt;

  PassResult infer(const std::string& puzzle, std::uint64_t seed) const {
    return run_inference<float>(grid(puzzle), ckpt.params, ckpt.config, seed);
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hierarchical reasoning model for Sudoku";

  py::register_exception<GridError>(m, "GridError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_ArithmeticError);

  // Grids are strings: '.' for blanks, then 1-9 and A.. for digits.
  m.def("energy", [](const std::string& g) { return energy(grid(g)); }, py::arg("grid"));
  m.def("is_valid_complete", [](const std::string& g) { return is_valid_complete(grid(g)); }, py::arg("grid"));
  m.def(
      "solve_count",
      [](const std::string& g, std::uint64_t cap) {
        const SolveReport r = solve_count(grid(g), cap);
        return std::make_pair(r.solution_count, r.first_solution ? std::optional<std::string>(serialize_grid(*r.first_solution))
                                                                 : std::nullopt);
      },
      py::arg("grid"), py::arg("cap") = 2, "Number of solutions (capped) and the first one found.");
  m.def(
      "generate_dataset",
      [](std::uint64_t seed, int box_size, int count, int clues) {
        return to_pairs(generate_dataset(seed, box_size, count, clues));
      },
      py::arg("seed"), py::arg("box_size"), py::arg("count"), py::arg("clues"),
      "List of (puzzle, solution) pairs with unique solutions.");
  m.def(
      "mix_dataset",
      [](const std::vector<Pair>& base, int replicates, double reveal_min, double reveal_max, std::uint64_t seed) {
        return to_pairs(build_mixed_dataset(from_pairs(base), replicates, {reveal_min, reveal_max}, seed));
      },
      py::arg("base"), py::arg("replicates") = 4, py::arg("reveal_min") = 0.0, py::arg("reveal_max") = 1.0,
      py::arg("seed") = 0);

  py::class_<GridTransform>(m, "Transform")
      .def_static("identity", &GridTransform::identity, py::arg("box_size"))
      .def_static(
          "random",
          [](std::uint64_t seed, int box_size) {
            Rng rng(seed);
            return random_transform(rng, box_size);
          },
          py::arg("seed"), py::arg("box_size"))
      .def_static("relabel_set", &sample_relabel_set, py::arg("k"), py::arg("box_size"), py::arg("seed"))
      .def("apply", [](const GridTransform& t, const std::string& g) { return serialize_grid(apply_transform(t, grid(g))); })
      .def("inverse", &invert_transform)
      .def("compose", &compose_transform, py::arg("inner"), "self after inner")
      .def("to_dict", [](const GridTransform& t) { return from_json(transform_to_json(t)); })
      .def("__eq__", [](const GridTransform& a, const GridTransform& b) { return a == b; });

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::filesystem::path& path) { return Model{load_checkpoint(path)}; }), py::arg("path"))
      .def_property_readonly("step", [](const Model& mdl) { return mdl.ckpt.step; })
      .def_property_readonly("config", [](const Model& mdl) { return from_json(config_to_json(mdl.ckpt.config)); })
      .def(
          "infer", [](const Model& mdl, const std::string& puzzle, std::uint64_t seed) { return pass_dict(mdl.infer(puzzle, seed)); },
          py::arg("puzzle"), py::arg("seed") = 0, "ACT-halted single pass.")
      .def(
          "relabel_vote",
          [](const Model& mdl, const std::string& puzzle, int k, std::uint64_t seed) {
            return vote_dict(multipass_relabel<float>(grid(puzzle), mdl.ckpt.params, k, mdl.ckpt.config, seed));
          },
          py::arg("puzzle"), py::arg("k") = 9, py::arg("seed") = 0)
      .def(
          "trace",
          [](const Model& mdl, const std::string& puzzle, const std::string& solution) {
            const ReasoningTrace t = capture_trace(grid(puzzle), grid(solution), mdl.ckpt.params.cast<double>(), mdl.ckpt.config);
            py::list rows;
            for (std::size_t i = 0; i < t.size(); ++i) {
              py::dict r;
              r["segment"] = i + 1;
              r["prediction"] = serialize_grid(t.predictions[i]);
              r["loss"] = t.loss[i];
              r["energy"] = t.energy[i];
              r["exact"] = static_cast<bool>(t.exact[i]);
              r["update_norm"] = t.update_norm[i];
              r["q_halt"] = t.q[i].q_halt;
              r["q_continue"] = t.q[i].q_continue;
              rows.append(r);
            }
            return rows;
          },
          py::arg("puzzle"), py::arg("solution"), "Per-segment record without halting.")
      .def(
          "stability",
          [](const Model& mdl, const std::vector<std::string>& solutions, const std::string& probe, std::uint64_t seed) {
            std::vector<PuzzleGrid> sols;
            for (const auto& s : solutions) sols.push_back(grid(s));
            const auto probes = make_probes(sols, probe_kind_from_name(probe), seed);
            return from_json(stability_to_json(stability_audit(mdl.ckpt.params.cast<double>(), probes, mdl.ckpt.config)));
          },
          py::arg("solutions"), py::arg("probe") = "fully-revealed", py::arg("seed") = 0);

  m.def(
      "train",
      [](const std::vector<Pair>& data, const py::object& model, const py::object& train,
         const std::filesystem::path& out_dir) {
        const ModelConfig mc = config_from_json(to_json(model));
        const TrainConfig tc = train_config_from_json(to_json(train));
        TrainingRun run;
        {
          py::gil_scoped_release release;
          run = run_training(from_pairs(data), mc, tc, out_dir);
        }
        py::dict d;
        d["checkpoints"] = run.checkpoints;
        d["steps"] = run.checkpoint_steps;
        d["log"] = run.log_path;
        return d;
      },
      py::arg("data"), py::arg("model") = py::dict(), py::arg("train") = py::dict(), py::arg("out_dir"),
      "Trains from scratch; config dicts use the same keys as the JSON manifests.");
  m.def(
      "evaluate",
      [](const std::vector<Pair>& data, const std::vector<std::filesystem::path>& unmixed,
         const std::vector<std::filesystem::path>& mixed, int k, std::uint64_t seed) {
        RunCheckpoints runs[2];
        ModelConfig config;
        bool have = false;
        const std::vector<std::filesystem::path>* lists[2] = {&unmixed, &mixed};
        for (int r = 0; r < 2; ++r) {
          for (const auto& p : *lists[r]) {
            Checkpoint c = load_checkpoint(p);
            if (have && !(c.config == config)) throw std::invalid_argument("evaluate: checkpoints disagree on the model config");
            config = c.config;
            have = true;
            runs[r].members.push_back(std::move(c.params));
            runs[r].names.push_back(p.generic_string());
          }
        }
        EvalSettings settings;
        settings.relabel_k = k;
        settings.seed = seed;
        settings.include_pools = false;
        return from_json(report_to_json(evaluate_ablation(from_pairs(data), runs[0], runs[1], config, settings), ""));
      },
      py::arg("data"), py::arg("unmixed") = std::vector<std::filesystem::path>{},
      py::arg("mixed") = std::vector<std::filesystem::path>{}, py::arg("k") = 9, py::arg("seed") = 0,
      "Ablation report as a dict (rows plus per-sample detail).");
  m.def(
      "run_pipeline",
      [](const py::object& config, const std::filesystem::path& out_dir) {
        const ExperimentConfig c = experiment_from_json(to_json(config));
        nlohmann::json manifest;
        {
          py::gil_scoped_release release;
          manifest = run_pipeline(c, out_dir, "python").manifest;
        }
        return from_json(manifest);
      },
      py::arg("config"), py::arg("out_dir"), "Dataset, training and evaluation; returns the manifest.");
  m.def("default_experiment", [] { return from_json(experiment_to_json(ExperimentConfig{})); });
}
