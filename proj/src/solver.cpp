#include "hrm/solver.hpp"

#include <bit>
#include <numeric>
#include <vector>

#include "hrm/errors.hpp"
#include "hrm/rng.hpp"

namespace hrm {

namespace {

// Row/column/box occupancy masks over a mutable board.
class Board {
 public:
  explicit Board(const PuzzleGrid& grid)
      : n_(grid.box_size()),
        side_(grid.side()),
        full_((std::uint32_t{1} << side_) - 1),
        cells_(grid.cells().begin(), grid.cells().end()),
        rows_(static_cast<std::size_t>(side_), 0),
        cols_(static_cast<std::size_t>(side_), 0),
        boxes_(static_cast<std::size_t>(side_), 0) {
    for (int i = 0; i < side_ * side_; ++i) {
      const Token d = cells_[static_cast<std::size_t>(i)];
      if (d == kBlank) continue;
      const std::uint32_t bit = std::uint32_t{1} << (d - 1);
      if ((used(i) & bit) != 0) consistent_ = false;
      mark(i, bit);
    }
  }

  bool consistent() const { return consistent_; }

  std::uint32_t candidates(int cell) const { return full_ & ~used(cell); }

  void place(int cell, Token d) {
    cells_[static_cast<std::size_t>(cell)] = d;
    mark(cell, std::uint32_t{1} << (d - 1));
  }

  void clear(int cell) {
    const Token d = cells_[static_cast<std::size_t>(cell)];
    const std::uint32_t bit = ~(std::uint32_t{1} << (d - 1));
    rows_[row(cell)] &= bit;
    cols_[col(cell)] &= bit;
    boxes_[box(cell)] &= bit;
    cells_[static_cast<std::size_t>(cell)] = kBlank;
  }

  // Most-constrained blank cell, lowest index on ties; -1 when complete.
  int pick_cell(std::uint32_t& cands) const {
    int best = -1;
    int best_count = side_ + 1;
    for (int i = 0; i < side_ * side_; ++i) {
      if (cells_[static_cast<std::size_t>(i)] != kBlank) continue;
      const std::uint32_t c = candidates(i);
      const int k = std::popcount(c);
      if (k < best_count) {
        best = i;
        best_count = k;
        cands = c;
        if (k <= 1) break;
      }
    }
    return best;
  }

  PuzzleGrid snapshot() const { return PuzzleGrid(n_, cells_); }

 private:
  std::size_t row(int cell) const { return static_cast<std::size_t>(cell / side_); }
  std::size_t col(int cell) const { return static_cast<std::size_t>(cell % side_); }
  std::size_t box(int cell) const {
    const int r = cell / side_;
    const int c = cell % side_;
    return static_cast<std::size_t>((r / n_) * n_ + c / n_);
  }
  std::uint32_t used(int cell) const { return rows_[row(cell)] | cols_[col(cell)] | boxes_[box(cell)]; }
  void mark(int cell, std::uint32_t bit) {
    rows_[row(cell)] |= bit;
    cols_[col(cell)] |= bit;
    boxes_[box(cell)] |= bit;
  }

  int n_;
  int side_;
  std::uint32_t full_;
  std::vector<Token> cells_;
  std::vector<std::uint32_t> rows_, cols_, boxes_;
  bool consistent_ = true;
};

void count_rec(Board& board, std::uint64_t cap, SolveReport& report) {
  std::uint32_t cands = 0;
  const int cell = board.pick_cell(cands);
  if (cell < 0) {
    if (report.solution_count == 0) report.first_solution = board.snapshot();
    ++report.solution_count;
    return;
  }
  while (cands != 0 && report.solution_count < cap) {
    const int bit = std::countr_zero(cands);
    cands &= cands - 1;
    board.place(cell, static_cast<Token>(bit + 1));
    count_rec(board, cap, report);
    board.clear(cell);
  }
}

// Randomized fill; gives up (returns false) once `budget` placements are spent.
bool fill_rec(Board& board, Rng& rng, std::uint64_t& budget) {
  std::uint32_t cands = 0;
  const int cell = board.pick_cell(cands);
  if (cell < 0) return true;
  std::vector<Token> order;
  while (cands != 0) {
    order.push_back(static_cast<Token>(std::countr_zero(cands) + 1));
    cands &= cands - 1;
  }
  rng.shuffle(std::span<Token>(order));
  for (Token d : order) {
    if (budget == 0) return false;
    --budget;
    board.place(cell, d);
    if (fill_rec(board, rng, budget)) return true;
    board.clear(cell);
  }
  return false;
}

}  // namespace

SolveReport solve_count(const PuzzleGrid& grid, std::uint64_t cap) {
  if (cap < 1) throw std::invalid_argument("solve_count cap must be >= 1");
  SolveReport report;
  Board board(grid);
  if (!board.consistent()) return report;
  count_rec(board, cap, report);
  return report;
}

PuzzleGrid random_solution(Rng& rng, int box_size) {
  // Random fills of large grids occasionally wander into huge dead subtrees;
  // restarting from scratch is far cheaper than finishing the search.
  const PuzzleGrid empty(box_size);
  const std::uint64_t limit = 200ULL * static_cast<std::uint64_t>(empty.cell_count());
  for (;;) {
    Board board{empty};
    std::uint64_t budget = limit;
    if (fill_rec(board, rng, budget)) return board.snapshot();
  }
}

PuzzleGrid generate_puzzle(std::uint64_t seed, int box_size, int target_clues,
                           const GenerateOptions& options) {
  const PuzzleGrid probe(box_size);
  const int cells = probe.cell_count();
  if (target_clues < 0 || target_clues > cells) {
    throw std::invalid_argument("target_clues " + std::to_string(target_clues) +
                                " outside [0, " + std::to_string(cells) + "]");
  }
  Rng rng(seed);
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    PuzzleGrid puzzle = random_solution(rng, box_size);
    if (target_clues == cells) return puzzle;
    std::vector<int> order(static_cast<std::size_t>(cells));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<int>(order));
    int clues = cells;
    for (int idx : order) {
      if (clues <= target_clues) break;
      const Token saved = puzzle[idx];
      puzzle.set(idx, kBlank);
      if (solve_count(puzzle, 2).solution_count == 1) {
        --clues;
      } else {
        puzzle.set(idx, saved);
      }
    }
    if (clues <= target_clues) return puzzle;
  }
  throw GenerationError("no unique puzzle with <= " + std::to_string(target_clues) +
                        " clues after " + std::to_string(options.max_attempts) +
                        " attempts; raise the clue target");
}

bool completes(const PuzzleGrid& puzzle, const PuzzleGrid& solution) {
  if (puzzle.box_size() != solution.box_size() || !is_valid_complete(solution)) return false;
  for (int i = 0; i < puzzle.cell_count(); ++i) {
    if (puzzle[i] != kBlank && puzzle[i] != solution[i]) return false;
  }
  return true;
}

PuzzleGrid simplify_puzzle(const PuzzleGrid& puzzle, const PuzzleGrid& solution,
                           int reveal_count, std::uint64_t seed) {
  if (!completes(puzzle, solution)) {
    throw GridError("solution does not complete the puzzle");
  }
  std::vector<int> blanks;
  for (int i = 0; i < puzzle.cell_count(); ++i) {
    if (puzzle[i] == kBlank) blanks.push_back(i);
  }
  if (reveal_count < 0 || reveal_count > static_cast<int>(blanks.size())) {
    throw std::invalid_argument("reveal_count " + std::to_string(reveal_count) +
                                " exceeds the " + std::to_string(blanks.size()) + " blank cells");
  }
  Rng rng(seed);
  // Partial Fisher-Yates: the first reveal_count entries are a uniform subset.
  for (int i = 0; i < reveal_count; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   rng.uniform_index(blanks.size() - static_cast<std::size_t>(i));
    std::swap(blanks[static_cast<std::size_t>(i)], blanks[j]);
  }
  PuzzleGrid out = puzzle;
  for (int i = 0; i < reveal_count; ++i) {
    const int idx = blanks[static_cast<std::size_t>(i)];
    out.set(idx, solution[idx]);
  }
  return out;
}

}  // namespace hrm
