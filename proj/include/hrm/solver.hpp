#pragma once

#include <cstdint>
#include <optional>

#include "hrm/grid.hpp"

namespace hrm {

class Rng;

struct SolveReport {
  std::uint64_t solution_count = 0;  // min(true count, cap)
  std::optional<PuzzleGrid> first_solution;
};

/// Exhaustive backtracking counter. Cells are chosen most-constrained first
/// (lowest index on ties) and values tried in ascending order, so
/// first_solution is deterministic. A grid whose clues already conflict
/// counts 0.
SolveReport solve_count(const PuzzleGrid& grid, std::uint64_t cap);

/// A uniformly-ordered randomized fill of an empty grid.
PuzzleGrid random_solution(Rng& rng, int box_size);

struct GenerateOptions {
  int max_attempts = 64;
};

/// Greedy blanking from a random complete grid until at most target_clues
/// remain, certifying uniqueness (cap 2) after every removal. Throws
/// GenerationError when no attempt reaches the target.
PuzzleGrid generate_puzzle(std::uint64_t seed, int box_size, int target_clues,
                           const GenerateOptions& options = {});

/// Reveals reveal_count uniformly chosen blanks of puzzle using solution.
PuzzleGrid simplify_puzzle(const PuzzleGrid& puzzle, const PuzzleGrid& solution,
                           int reveal_count, std::uint64_t seed);

/// True iff solution is valid-complete and agrees with every clue of puzzle.
bool completes(const PuzzleGrid& puzzle, const PuzzleGrid& solution);

}  // namespace hrm
