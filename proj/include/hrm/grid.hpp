#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hrm {

using Token = std::uint8_t;
inline constexpr Token kBlank = 0;

/// An n^2 x n^2 Sudoku grid stored row-major. Token 0 is blank, 1..n^2 are
/// digits. Supported box sizes are 2..5 so every digit has a one-character
/// text symbol.
class PuzzleGrid {
 public:
  static constexpr int kMinBox = 2;
  static constexpr int kMaxBox = 5;

  /// All-blank grid.
  explicit PuzzleGrid(int box_size);
  /// Throws GridError when the length or any token is out of range.
  PuzzleGrid(int box_size, std::vector<Token> cells);

  int box_size() const { return box_size_; }
  int side() const { return box_size_ * box_size_; }
  int cell_count() const { return side() * side(); }

  Token operator[](int index) const { return cells_[static_cast<std::size_t>(index)]; }
  Token at(int row, int col) const { return (*this)[row * side() + col]; }
  void set(int index, Token value);
  void set(int row, int col, Token value) { set(row * side() + col, value); }

  std::span<const Token> cells() const { return cells_; }
  int blank_count() const;
  int clue_count() const { return cell_count() - blank_count(); }

  friend bool operator==(const PuzzleGrid&, const PuzzleGrid&) = default;

 private:
  int box_size_;
  std::vector<Token> cells_;
};

/// Parses row-major grid text. Whitespace is ignored; '.' and '0' are blank;
/// '1'..'9' then 'A'.. (case-insensitive) encode digits 1..n^2.
PuzzleGrid parse_grid(std::string_view text, int box_size);

/// Inverse of parse_grid with blanks written as '.'.
std::string serialize_grid(const PuzzleGrid& grid);

char token_symbol(Token t);

/// True iff no blanks and every row, column and box holds each digit once.
bool is_valid_complete(const PuzzleGrid& grid);

/// Conflict count: sum over rows, columns and boxes of max(count(d, u) - 1, 0)
/// for every digit d. Blanks join no count.
int energy(const PuzzleGrid& grid);

/// Index lists of the 3 n^2 units (rows, then columns, then boxes).
std::vector<std::vector<int>> grid_units(int box_size);

}  // namespace hrm
