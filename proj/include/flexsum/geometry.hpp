#pragma once

// Axis-aligned geometry primitives in the (p, q) power plane plus the packed
// bit grid used for pixelized Minkowski accumulation. Pixel indices are
// 1-based: pixel (k, l) is the closed region
//   [origin_p + (k-1)*eps_p, origin_p + k*eps_p] x
//   [origin_q + (l-1)*eps_q, origin_q + l*eps_q].
// Index arithmetic uses a guarded ceiling on both edges, so a coordinate
// sitting exactly on a pixel boundary maps to the lower-index pixel and the
// computation stays branch-free.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace flexsum {

struct Point {
  double p = 0.0;
  double q = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool valid() const { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; }
  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
};

inline Interval operator+(const Interval& a, const Interval& b) {
  return {a.lo + b.lo, a.hi + b.hi};
}

struct Rect {
  Interval p;
  Interval q;

  double area() const { return p.length() * q.length(); }
  bool valid() const { return p.valid() && q.valid(); }
  bool contains(Point x, double tol = 0.0) const {
    return p.contains(x.p, tol) && q.contains(x.q, tol);
  }
  std::array<Point, 4> corners() const {
    return {Point{p.lo, q.lo}, Point{p.lo, q.hi}, Point{p.hi, q.lo}, Point{p.hi, q.hi}};
  }
};

inline Rect operator+(const Rect& a, const Rect& b) { return {a.p + b.p, a.q + b.q}; }

struct RectUnion {
  std::vector<Rect> blocks;

  bool empty() const { return blocks.empty(); }
  std::size_t size() const { return blocks.size(); }
  bool contains(Point x, double tol = 0.0) const {
    for (const Rect& r : blocks)
      if (r.contains(x, tol)) return true;
    return false;
  }
  // Precondition: at least one block.
  Rect bounding_box() const {
    if (blocks.empty()) throw std::invalid_argument("bounding_box: empty union");
    Rect b = blocks.front();
    for (const Rect& r : blocks) {
      b.p.lo = std::min(b.p.lo, r.p.lo);
      b.p.hi = std::max(b.p.hi, r.p.hi);
      b.q.lo = std::min(b.q.lo, r.q.lo);
      b.q.hi = std::max(b.q.hi, r.q.hi);
    }
    return b;
  }
};

// Pairwise block sums; no merging or deduplication.
inline RectUnion msum(const RectUnion& a, const RectUnion& b) {
  RectUnion out;
  out.blocks.reserve(a.size() * b.size());
  for (const Rect& ra : a.blocks)
    for (const Rect& rb : b.blocks) out.blocks.push_back(ra + rb);
  return out;
}

// Exact-coordinate deduplication (sort + unique). Intentionally no geometric
// merging: folds of point ensembles produce coordinate-identical repeats and
// nothing else we want collapsed.
inline void dedupe_blocks(std::vector<Rect>& blocks) {
  auto key = [](const Rect& r) { return std::array<double, 4>{r.p.lo, r.p.hi, r.q.lo, r.q.hi}; };
  std::sort(blocks.begin(), blocks.end(),
            [&](const Rect& a, const Rect& b) { return key(a) < key(b); });
  blocks.erase(std::unique(blocks.begin(), blocks.end(),
                           [&](const Rect& a, const Rect& b) { return key(a) == key(b); }),
               blocks.end());
}

// Absolute slack, in index units, absorbed before every ceil/floor so that
// values sitting on a pixel boundary up to fp noise land on the boundary
// index instead of spilling into the neighbour.
inline constexpr double kIndexGuard = 1e-9;

inline std::int64_t ceil_guarded(double x) {
  return static_cast<std::int64_t>(std::ceil(x - kIndexGuard));
}

inline std::int64_t floor_guarded(double x) {
  return static_cast<std::int64_t>(std::floor(x + kIndexGuard));
}

// Inclusive 1-based run of bits along one axis; empty when lo > hi.
struct BitRun {
  std::int64_t lo = 1;
  std::int64_t hi = 0;

  bool empty() const { return lo > hi; }
  std::int64_t count() const { return empty() ? 0 : hi - lo + 1; }
};

// Inclusive 1-based pixel index box [k0, kf] x [l0, lf].
struct IndexRange {
  std::int64_t k0 = 1;
  std::int64_t kf = 0;
  std::int64_t l0 = 1;
  std::int64_t lf = 0;

  bool empty() const { return k0 > kf || l0 > lf; }
  std::int64_t count() const { return empty() ? 0 : (kf - k0 + 1) * (lf - l0 + 1); }
};

// Indices of the pixels covering [lo, hi] on one axis:
//   first = max(1, ceil((lo - origin) / eps)), last = max(1, ceil((hi - origin) / eps)).
// A boundary coordinate lands in the lower-index pixel; a block touching the
// origin clamps to pixel 1. The caller promises the block sits inside the
// window: below-origin or past-the-end content is a contract violation, not
// something to clip silently (clipping would break the superset guarantee).
inline BitRun raster_axis_span(double lo, double hi, double origin, double eps,
                               std::int64_t dim) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("raster: eps must be > 0");
  if (hi < lo) throw std::invalid_argument("raster: inverted block");
  const double rel_lo = (lo - origin) / eps;
  const double rel_hi = (hi - origin) / eps;
  if (rel_lo < -kIndexGuard) throw std::out_of_range("raster: block below grid origin");
  const std::int64_t k0 = std::max<std::int64_t>(1, ceil_guarded(rel_lo));
  const std::int64_t kf = std::max<std::int64_t>(1, ceil_guarded(rel_hi));
  if (kf > dim) throw std::out_of_range("raster: block past grid end");
  return {k0, kf};
}

class PixelGrid {
 public:
  PixelGrid(double origin_p, double origin_q, double eps_p, double eps_q, std::int64_t dim_p,
            std::int64_t dim_q)
      : op_(origin_p), oq_(origin_q), ep_(eps_p), eq_(eps_q), dp_(dim_p), dq_(dim_q) {
    if (!std::isfinite(op_) || !std::isfinite(oq_)) throw std::invalid_argument("grid: origin");
    if (!(ep_ > 0.0) || !(eq_ > 0.0) || !std::isfinite(ep_) || !std::isfinite(eq_))
      throw std::invalid_argument("grid: pixel size must be > 0");
    if (dp_ < 1 || dq_ < 1) throw std::invalid_argument("grid: dims must be >= 1");
    wpc_ = (dq_ + 63) / 64;
    const std::int64_t words = wpc_ * dp_;
    if (words > (std::int64_t{1} << 28)) throw std::length_error("grid: too large");
    words_.assign(static_cast<std::size_t>(words), 0);
  }

  double origin_p() const { return op_; }
  double origin_q() const { return oq_; }
  double eps_p() const { return ep_; }
  double eps_q() const { return eq_; }
  std::int64_t dim_p() const { return dp_; }
  std::int64_t dim_q() const { return dq_; }

  bool test(std::int64_t k, std::int64_t l) const {
    check_index(k, l);
    return (word(k, l) >> ((l - 1) & 63)) & 1u;
  }

  void mark(std::int64_t k, std::int64_t l) {
    check_index(k, l);
    word(k, l) |= std::uint64_t{1} << ((l - 1) & 63);
  }

  // Marks rows [rows.lo, rows.hi] of column k with whole-word fills.
  void mark_column_range(std::int64_t k, BitRun rows) {
    if (rows.empty()) return;
    check_index(k, rows.lo);
    check_index(k, rows.hi);
    const std::int64_t b0 = rows.lo - 1, b1 = rows.hi - 1;
    std::uint64_t* col = words_.data() + (k - 1) * wpc_;
    const std::int64_t w0 = b0 >> 6, w1 = b1 >> 6;
    const std::uint64_t first = ~std::uint64_t{0} << (b0 & 63);
    const std::uint64_t last = ~std::uint64_t{0} >> (63 - (b1 & 63));
    if (w0 == w1) {
      col[w0] |= first & last;
      return;
    }
    col[w0] |= first;
    for (std::int64_t w = w0 + 1; w < w1; ++w) col[w] = ~std::uint64_t{0};
    col[w1] |= last;
  }

  std::int64_t occupied() const {
    std::int64_t n = 0;
    for (std::uint64_t w : words_) n += std::popcount(w);
    return n;
  }

  // Physical extent of pixel (k, l) as a closed rectangle.
  Rect pixel_extent(std::int64_t k, std::int64_t l) const {
    check_index(k, l);
    return {{op_ + static_cast<double>(k - 1) * ep_, op_ + static_cast<double>(k) * ep_},
            {oq_ + static_cast<double>(l - 1) * eq_, oq_ + static_cast<double>(l) * eq_}};
  }

  // Point membership in the closed marked set, tolerant: true when some
  // marked pixel's closure contains the point moved by at most tol per axis.
  bool covers(Point x, double tol = 0.0) const {
    if (x.p < op_ - tol || x.p > op_ + static_cast<double>(dp_) * ep_ + tol) return false;
    if (x.q < oq_ - tol || x.q > oq_ + static_cast<double>(dq_) * eq_ + tol) return false;
    const auto clamp_idx = [](std::int64_t v, std::int64_t dim) {
      return std::min(std::max(v, std::int64_t{1}), dim);
    };
    // Pixel k's closure contains x + [-tol, tol] iff
    // ceil((x - tol - o)/e) <= k <= floor((x + tol - o)/e) + 1, so a boundary
    // point probes both neighbouring pixels.
    const std::int64_t k0 = clamp_idx(ceil_guarded((x.p - tol - op_) / ep_), dp_);
    const std::int64_t k1 = clamp_idx(floor_guarded((x.p + tol - op_) / ep_) + 1, dp_);
    const std::int64_t l0 = clamp_idx(ceil_guarded((x.q - tol - oq_) / eq_), dq_);
    const std::int64_t l1 = clamp_idx(floor_guarded((x.q + tol - oq_) / eq_) + 1, dq_);
    for (std::int64_t k = k0; k <= k1; ++k)
      for (std::int64_t l = l0; l <= l1; ++l)
        if (test(k, l)) return true;
    return false;
  }

  BitRun p_axis_span(double lo, double hi) const {
    return raster_axis_span(lo, hi, op_, ep_, dp_);
  }
  BitRun q_axis_span(double lo, double hi) const {
    return raster_axis_span(lo, hi, oq_, eq_, dq_);
  }

  // Maximal vertical runs of set pixels in column k, ascending.
  std::vector<BitRun> column_runs(std::int64_t k) const {
    if (k < 1 || k > dp_) throw std::out_of_range("grid: column index");
    std::vector<BitRun> runs;
    const std::uint64_t* col = words_.data() + (k - 1) * wpc_;
    for (std::int64_t wi = 0; wi < wpc_; ++wi) {
      std::uint64_t w = col[wi];
      std::int64_t base = wi * 64;
      while (w != 0) {
        const int s = std::countr_zero(w);
        const int len = std::countr_one(w >> s);
        const std::int64_t lo = base + s + 1, hi = base + s + len;
        if (!runs.empty() && runs.back().hi == lo - 1)
          runs.back().hi = hi;
        else
          runs.push_back({lo, hi});
        if (s + len >= 64) break;
        w >>= (s + len);
        w <<= (s + len);
      }
    }
    return runs;
  }

 private:
  void check_index(std::int64_t k, std::int64_t l) const {
    if (k < 1 || k > dp_ || l < 1 || l > dq_) throw std::out_of_range("grid: pixel index");
  }
  std::uint64_t& word(std::int64_t k, std::int64_t l) {
    return words_[static_cast<std::size_t>((k - 1) * wpc_ + ((l - 1) >> 6))];
  }
  const std::uint64_t& word(std::int64_t k, std::int64_t l) const {
    return words_[static_cast<std::size_t>((k - 1) * wpc_ + ((l - 1) >> 6))];
  }

  double op_, oq_, ep_, eq_;
  std::int64_t dp_, dq_, wpc_;
  std::vector<std::uint64_t> words_;
};

// Pixel index box covering the closed block: every point of the block lies in
// the closure of some pixel in the returned range. Does not mark anything.
inline IndexRange rasterize_block(const Rect& block, const PixelGrid& g) {
  const BitRun ks = g.p_axis_span(block.p.lo, block.p.hi);
  const BitRun ls = g.q_axis_span(block.q.lo, block.q.hi);
  return {ks.lo, ks.hi, ls.lo, ls.hi};
}

// Sets every pixel of the index box. Idempotent; never clears bits.
inline void mark_range(PixelGrid& g, const IndexRange& idx) {
  if (idx.empty()) return;
  for (std::int64_t k = idx.k0; k <= idx.kf; ++k) g.mark_column_range(k, {idx.l0, idx.lf});
}

// Row-major maximal horizontal runs: one rectangle per run, one pixel tall.
// Exact decomposition of the marked set with pixel-boundary coordinates.
inline RectUnion grid_to_rect_union(const PixelGrid& g) {
  RectUnion out;
  for (std::int64_t l = 1; l <= g.dim_q(); ++l) {
    std::int64_t start = 0;
    for (std::int64_t k = 1; k <= g.dim_p() + 1; ++k) {
      const bool on = k <= g.dim_p() && g.test(k, l);
      if (on && start == 0) start = k;
      if (!on && start != 0) {
        out.blocks.push_back(
            {{g.origin_p() + static_cast<double>(start - 1) * g.eps_p(),
              g.origin_p() + static_cast<double>(k - 1) * g.eps_p()},
             {g.origin_q() + static_cast<double>(l - 1) * g.eps_q(),
              g.origin_q() + static_cast<double>(l) * g.eps_q()}});
        start = 0;
      }
    }
  }
  return out;
}

}  // namespace flexsum
