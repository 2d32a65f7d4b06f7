#include "hrm/grid.hpp"

#include <algorithm>
#include <cctype>

#include "hrm/errors.hpp"

namespace hrm {

namespace {

void check_box_size(int box_size) {
  if (box_size < PuzzleGrid::kMinBox || box_size > PuzzleGrid::kMaxBox) {
    throw GridError("box size " + std::to_string(box_size) + " outside [2, 5]");
  }
}

int symbol_value(char c) {
  if (c == '.' || c == '0') return 0;
  if (c >= '1' && c <= '9') return c - '0';
  const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u >= 'A' && u <= 'Z') return u - 'A' + 10;
  return -1;
}

}  // namespace

PuzzleGrid::PuzzleGrid(int box_size) : box_size_(box_size) {
  check_box_size(box_size);
  cells_.assign(static_cast<std::size_t>(cell_count()), kBlank);
}

PuzzleGrid::PuzzleGrid(int box_size, std::vector<Token> cells)
    : box_size_(box_size), cells_(std::move(cells)) {
  check_box_size(box_size);
  if (static_cast<int>(cells_.size()) != cell_count()) {
    throw GridError("grid needs " + std::to_string(cell_count()) + " cells, got " +
                    std::to_string(cells_.size()));
  }
  for (Token t : cells_) {
    if (t > side()) throw GridError("token " + std::to_string(t) + " out of range");
  }
}

void PuzzleGrid::set(int index, Token value) {
  if (index < 0 || index >= cell_count()) throw GridError("cell index out of range");
  if (value > side()) throw GridError("token " + std::to_string(value) + " out of range");
  cells_[static_cast<std::size_t>(index)] = value;
}

int PuzzleGrid::blank_count() const {
  return static_cast<int>(std::count(cells_.begin(), cells_.end(), kBlank));
}

char token_symbol(Token t) {
  if (t == kBlank) return '.';
  if (t <= 9) return static_cast<char>('0' + t);
  return static_cast<char>('A' + (t - 10));
}

PuzzleGrid parse_grid(std::string_view text, int box_size) {
  check_box_size(box_size);
  const int side = box_size * box_size;
  std::vector<Token> cells;
  cells.reserve(static_cast<std::size_t>(side * side));
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    const int v = symbol_value(c);
    if (v < 0 || v > side) {
      throw GridError(std::string("symbol '") + c + "' not in the alphabet for box size " +
                      std::to_string(box_size));
    }
    cells.push_back(static_cast<Token>(v));
  }
  if (static_cast<int>(cells.size()) != side * side) {
    throw GridError("expected " + std::to_string(side * side) + " symbols, got " +
                    std::to_string(cells.size()));
  }
  return PuzzleGrid(box_size, std::move(cells));
}

std::string serialize_grid(const PuzzleGrid& grid) {
  std::string out;
  out.reserve(static_cast<std::size_t>(grid.cell_count()));
  for (Token t : grid.cells()) out.push_back(token_symbol(t));
  return out;
}

std::vector<std::vector<int>> grid_units(int box_size) {
  const int n = box_size;
  const int side = n * n;
  std::vector<std::vector<int>> units;
  units.reserve(static_cast<std::size_t>(3 * side));
  for (int r = 0; r < side; ++r) {
    std::vector<int> u;
    for (int c = 0; c < side; ++c) u.push_back(r * side + c);
    units.push_back(std::move(u));
  }
  for (int c = 0; c < side; ++c) {
    std::vector<int> u;
    for (int r = 0; r < side; ++r) u.push_back(r * side + c);
    units.push_back(std::move(u));
  }
  for (int b = 0; b < side; ++b) {
    const int r0 = (b / n) * n;
    const int c0 = (b % n) * n;
    std::vector<int> u;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) u.push_back((r0 + i) * side + (c0 + j));
    units.push_back(std::move(u));
  }
  return units;
}

int energy(const PuzzleGrid& grid) {
  const int n = grid.box_size();
  const int side = grid.side();
  // counts[unit][digit] for rows, columns and boxes
  std::vector<int> rows(static_cast<std::size_t>(side * (side + 1)), 0);
  std::vector<int> cols(rows.size(), 0);
  std::vector<int> boxes(rows.size(), 0);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int d = grid.at(r, c);
      if (d == kBlank) continue;
      const int b = (r / n) * n + c / n;
      ++rows[static_cast<std::size_t>(r * (side + 1) + d)];
      ++cols[static_cast<std::size_t>(c * (side + 1) + d)];
      ++boxes[static_cast<std::size_t>(b * (side + 1) + d)];
    }
  }
  int total = 0;
  for (const auto* counts : {&rows, &cols, &boxes}) {
    for (int k : *counts) total += std::max(k - 1, 0);
  }
  return total;
}

bool is_valid_complete(const PuzzleGrid& grid) {
  const std::uint32_t full = (std::uint32_t{1} << grid.side()) - 1;
  for (const auto& unit : grid_units(grid.box_size())) {
    std::uint32_t seen = 0;
    for (int idx : unit) {
      const Token d = grid[idx];
      if (d == kBlank) return false;
      seen |= std::uint32_t{1} << (d - 1);
    }
    if (seen != full) return false;
  }
  return true;
}

}  // namespace hrm
