#include "hrm/symmetry.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <json.hpp>

#include "hrm/errors.hpp"
#include "hrm/rng.hpp"

namespace hrm {

namespace {

using Perm = std::vector<int>;

Perm iota_perm(int n, int start = 0) {
  Perm p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), start);
  return p;
}

bool is_perm(const Perm& p, int size, int start) {
  if (static_cast<int>(p.size()) != size) return false;
  std::vector<bool> seen(static_cast<std::size_t>(size), false);
  for (int v : p) {
    const int k = v - start;
    if (k < 0 || k >= size || seen[static_cast<std::size_t>(k)]) return false;
    seen[static_cast<std::size_t>(k)] = true;
  }
  return true;
}

Perm inverse(const Perm& p) {
  Perm inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[static_cast<std::size_t>(p[i])] = static_cast<int>(i);
  return inv;
}

std::size_t at(int i) { return static_cast<std::size_t>(i); }

// Source line index of output line (b, i) under a band/in-band permutation.
int source_line(const Perm& outer, const std::vector<Perm>& inner, int n, int line) {
  const int b = line / n;
  const int i = line % n;
  return outer[at(b)] * n + inner[at(b)][at(i)];
}

// Spatial part of a transform, acting on line indices: src = outer/inner.
struct LinePerm {
  Perm outer;
  std::vector<Perm> inner;
};

// Composite source map "first apply b, then a": src_c = src_b o src_a.
LinePerm compose_lines(const LinePerm& a, const LinePerm& b) {
  LinePerm c;
  const std::size_t n = a.outer.size();
  c.outer.resize(n);
  c.inner.assign(n, Perm(n));
  for (std::size_t band = 0; band < n; ++band) {
    const int mid = a.outer[band];
    c.outer[band] = b.outer[at(mid)];
    for (std::size_t i = 0; i < n; ++i) {
      c.inner[band][i] = b.inner[at(mid)][at(a.inner[band][i])];
    }
  }
  return c;
}

LinePerm invert_lines(const LinePerm& p) {
  LinePerm inv;
  const std::size_t n = p.outer.size();
  inv.outer = inverse(p.outer);
  inv.inner.resize(n);
  for (std::size_t band = 0; band < n; ++band) {
    inv.inner[band] = inverse(p.inner[at(inv.outer[band])]);
  }
  return inv;
}

LinePerm rows_of(const GridTransform& t) { return {t.band_perm, t.row_perms}; }
LinePerm cols_of(const GridTransform& t) { return {t.stack_perm, t.col_perms}; }

GridTransform assemble(int n, Perm relabel, LinePerm rows, LinePerm cols, bool transpose) {
  GridTransform t;
  t.box_size = n;
  t.relabel = std::move(relabel);
  t.band_perm = std::move(rows.outer);
  t.row_perms = std::move(rows.inner);
  t.stack_perm = std::move(cols.outer);
  t.col_perms = std::move(cols.inner);
  t.transpose = transpose;
  return t;
}

void require_same(const GridTransform& a, const GridTransform& b) {
  if (a.box_size != b.box_size) {
    throw ShapeError("transform box sizes differ: " + std::to_string(a.box_size) + " vs " +
                     std::to_string(b.box_size));
  }
}

Perm random_perm(Rng& rng, int n, int start) {
  Perm p = iota_perm(n, start);
  rng.shuffle(std::span<int>(p));
  return p;
}

}  // namespace

GridTransform GridTransform::identity(int box_size) {
  const int n = box_size;
  std::vector<Perm> inner(at(n), iota_perm(n));
  return assemble(n, iota_perm(n * n, 1), {iota_perm(n), inner}, {iota_perm(n), inner}, false);
}

bool GridTransform::is_relabel_only() const {
  const GridTransform id = identity(box_size);
  return !transpose && band_perm == id.band_perm && row_perms == id.row_perms &&
         stack_perm == id.stack_perm && col_perms == id.col_perms;
}

void GridTransform::validate() const {
  const int n = box_size;
  bool ok = n >= PuzzleGrid::kMinBox && n <= PuzzleGrid::kMaxBox &&
            is_perm(relabel, n * n, 1) && is_perm(band_perm, n, 0) && is_perm(stack_perm, n, 0) &&
            static_cast<int>(row_perms.size()) == n && static_cast<int>(col_perms.size()) == n;
  for (std::size_t b = 0; ok && b < row_perms.size(); ++b) {
    ok = is_perm(row_perms[b], n, 0) && is_perm(col_perms[b], n, 0);
  }
  if (!ok) throw ShapeError("malformed grid transform");
}

PuzzleGrid apply_transform(const GridTransform& t, const PuzzleGrid& g) {
  if (t.box_size != g.box_size()) {
    throw ShapeError("transform box size " + std::to_string(t.box_size) +
                     " does not match grid box size " + std::to_string(g.box_size()));
  }
  const int n = t.box_size;
  const int side = n * n;
  PuzzleGrid out(n);
  for (int r = 0; r < side; ++r) {
    const int sr = source_line(t.band_perm, t.row_perms, n, r);
    for (int c = 0; c < side; ++c) {
      const int sc = source_line(t.stack_perm, t.col_perms, n, c);
      // The spatial permutation reads from the transposed grid when flagged.
      const Token v = t.transpose ? g.at(sc, sr) : g.at(sr, sc);
      out.set(r, c, v == kBlank ? kBlank : static_cast<Token>(t.relabel[at(v - 1)]));
    }
  }
  return out;
}

GridTransform compose_transform(const GridTransform& a, const GridTransform& b) {
  require_same(a, b);
  const int n = a.box_size;
  // a o b = Ra Pa Ta Rb Pb Tb. Relabels commute with spatial moves, and
  // Ta Pb = Pb' Ta where Pb' swaps the row and column parts of Pb.
  Perm relabel(at(n * n));
  for (std::size_t d = 0; d < relabel.size(); ++d) relabel[d] = a.relabel[at(b.relabel[d] - 1)];
  const LinePerm b_rows = a.transpose ? cols_of(b) : rows_of(b);
  const LinePerm b_cols = a.transpose ? rows_of(b) : cols_of(b);
  return assemble(n, std::move(relabel), compose_lines(rows_of(a), b_rows),
                  compose_lines(cols_of(a), b_cols), a.transpose != b.transpose);
}

GridTransform invert_transform(const GridTransform& t) {
  const int n = t.box_size;
  // (R P T)^-1 = T P^-1 R^-1 = (P^-1)' T R^-1, with ' the row/column swap under T.
  const Perm relabel_inv = [&] {
    Perm inv(at(n * n));
    for (std::size_t d = 0; d < inv.size(); ++d) inv[at(t.relabel[d] - 1)] = static_cast<int>(d) + 1;
    return inv;
  }();
  LinePerm rows = invert_lines(rows_of(t));
  LinePerm cols = invert_lines(cols_of(t));
  if (t.transpose) std::swap(rows, cols);
  return assemble(n, relabel_inv, std::move(rows), std::move(cols), t.transpose);
}

GridTransform random_transform(Rng& rng, int box_size) {
  const int n = box_size;
  GridTransform t;
  t.box_size = n;
  t.relabel = random_perm(rng, n * n, 1);
  t.band_perm = random_perm(rng, n, 0);
  for (int b = 0; b < n; ++b) t.row_perms.push_back(random_perm(rng, n, 0));
  t.stack_perm = random_perm(rng, n, 0);
  for (int b = 0; b < n; ++b) t.col_perms.push_back(random_perm(rng, n, 0));
  t.transpose = rng.uniform_index(2) == 1;
  return t;
}

std::vector<GridTransform> sample_relabel_set(int k, int box_size, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("relabel set size must be >= 1");
  const int digits = box_size * box_size;
  // (digits)! - 1 non-identity relabelings exist; stop counting once it exceeds k.
  std::uint64_t available = 1;
  for (int i = 2; i <= digits && available <= static_cast<std::uint64_t>(k); ++i) available *= static_cast<std::uint64_t>(i);
  if (static_cast<std::uint64_t>(k - 1) > available - 1) {
    throw std::invalid_argument("only " + std::to_string(available - 1) +
                                " non-identity relabelings exist for box size " +
                                std::to_string(box_size) + ", requested " + std::to_string(k - 1));
  }
  std::vector<GridTransform> out{GridTransform::identity(box_size)};
  std::set<Perm> used{out.front().relabel};
  Rng rng(seed);
  while (static_cast<int>(out.size()) < k) {
    Perm p = random_perm(rng, digits, 1);
    if (!used.insert(p).second) continue;
    GridTransform t = GridTransform::identity(box_size);
    t.relabel = std::move(p);
    out.push_back(std::move(t));
  }
  return out;
}

nlohmann::json transform_to_json(const GridTransform& t) {
  return {{"box_size", t.box_size},   {"relabel", t.relabel},     {"band_perm", t.band_perm},
          {"row_perms", t.row_perms}, {"stack_perm", t.stack_perm}, {"col_perms", t.col_perms},
          {"transpose", t.transpose}};
}

GridTransform transform_from_json(const nlohmann::json& j) {
  GridTransform t;
  t.box_size = j.at("box_size").get<int>();
  t.relabel = j.at("relabel").get<Perm>();
  t.band_perm = j.at("band_perm").get<Perm>();
  t.row_perms = j.at("row_perms").get<std::vector<Perm>>();
  t.stack_perm = j.at("stack_perm").get<Perm>();
  t.col_perms = j.at("col_perms").get<std::vector<Perm>>();
  t.transpose = j.at("transpose").get<bool>();
  t.validate();
  return t;
}

}  // namespace hrm
