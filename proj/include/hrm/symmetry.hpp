#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrm/grid.hpp"

namespace hrm {

class Rng;

/// An element of the Sudoku equivalence group.
///
/// Applying a transform to a grid runs, in order: an optional transpose, a
/// row permutation, a column permutation and finally a digit relabeling.
/// Rows are addressed as (band, row-in-band). Output row (b, i) is read from
/// input row (band_perm[b], row_perms[b][i]); columns likewise with
/// stack_perm/col_perms. Digit d becomes relabel[d - 1]; blanks stay blank.
///
/// Rotations are expressible: a quarter turn is a transpose followed by
/// reversing the column order.
struct GridTransform {
  int box_size = 0;
  std::vector<int> relabel;  // permutation of 1..n^2
  std::vector<int> band_perm;
  std::vector<std::vector<int>> row_perms;
  std::vector<int> stack_perm;
  std::vector<std::vector<int>> col_perms;
  bool transpose = false;

  static GridTransform identity(int box_size);

  bool is_relabel_only() const;
  /// Throws ShapeError unless every permutation is a bijection of the right size.
  void validate() const;

  friend bool operator==(const GridTransform&, const GridTransform&) = default;
};

PuzzleGrid apply_transform(const GridTransform& t, const PuzzleGrid& g);
GridTransform invert_transform(const GridTransform& t);
/// apply(compose(a, b), g) == apply(a, apply(b, g)).
GridTransform compose_transform(const GridTransform& a, const GridTransform& b);

/// Uniform sample over the whole group (transpose with probability 1/2).
GridTransform random_transform(Rng& rng, int box_size);

/// k pure relabelings: identity first, then k - 1 distinct non-identity
/// digit permutations. Throws std::invalid_argument when k - 1 > (n^2)! - 1.
std::vector<GridTransform> sample_relabel_set(int k, int box_size, std::uint64_t seed);

nlohmann::json transform_to_json(const GridTransform& t);
GridTransform transform_from_json(const nlohmann::json& j);

}  // namespace hrm
