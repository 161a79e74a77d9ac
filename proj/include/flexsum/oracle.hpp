#pragma once

// Independent ground-truth machinery: dense point sampling of DER domains,
// the brute-force Minkowski sum of sampled clouds, and the superset and
// tightness checks that compare an aggregation result against such truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "flexsum/aggregator.hpp"

namespace flexsum {

struct PointCloud {
  std::vector<Point> points;
  // Covering radius: every point of the sampled set lies within Chebyshev
  // delta of some sample.
  double delta = 0.0;
};

struct CapExceeded : std::runtime_error {
  double product;
  explicit CapExceeded(double prod)
      : std::runtime_error("brute force product of " + std::to_string(prod) +
                           " points exceeds the configured cap"),
        product(prod) {}
};

// Edge-anchored scan of a domain at pitch <= delta per axis: every piece's p
// range is divided into equal parts with exact endpoints kept, and every
// sampled column's q interval likewise. The shipped models have column
// enclosures that grow toward the piece interior, so any domain point is
// within Chebyshev delta of some sample. Point pieces contribute their exact
// points. Deterministic; exact duplicates removed.
inline PointCloud sample_domain(const FlexDomain& d, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("sample_domain: delta must be > 0");
  PointCloud out;
  out.delta = delta;
  for (const FlexPiece& piece : d.pieces) {
    std::vector<double> ps;
    detail::for_each_part(piece.p_range.lo, piece.p_range.hi, delta,
                          [&ps](double a, double) { ps.push_back(a); });
    if (piece.p_range.length() > 0.0) ps.push_back(piece.p_range.hi);
    for (const double p : ps) {
      const double qlo = piece.q_lower(p), qhi = piece.q_upper(p);
      detail::for_each_part(qlo, qhi, delta,
                            [&out, p](double a, double) { out.points.push_back({p, a}); });
      if (qhi > qlo) out.points.push_back({p, qhi});
    }
  }
  const auto lt = [](const Point& a, const Point& b) {
    return a.p != b.p ? a.p < b.p : a.q < b.q;
  };
  const auto eq = [](const Point& a, const Point& b) { return a.p == b.p && a.q == b.q; };
  std::sort(out.points.begin(), out.points.end(), lt);
  out.points.erase(std::unique(out.points.begin(), out.points.end(), eq), out.points.end());
  return out;
}

// Exact Minkowski sum of sampled clouds: all |C_1| x ... x |C_N| coordinate
// sums, deduplicated on a lattice of pitch delta/10 (the first
// representative's exact coordinates are kept; with delta 0 duplicates are
// removed exactly). The output covering radius is the max input delta, which
// understates the stacked per-operand displacement, so downstream checks err
// on the strict side. Throws CapExceeded when the raw product exceeds cap.
inline PointCloud brute_force_msum(const std::vector<PointCloud>& clouds, double cap = 1e7) {
  if (clouds.empty()) throw std::invalid_argument("brute_force_msum: no clouds");
  double product = 1.0, delta = 0.0;
  for (const PointCloud& c : clouds) {
    if (c.points.empty()) throw std::invalid_argument("brute_force_msum: empty cloud");
    product *= static_cast<double>(c.points.size());
    delta = std::max(delta, c.delta);
  }
  if (!(product <= cap)) throw CapExceeded(product);

  PointCloud out;
  out.delta = delta;
  const double pitch = delta / 10.0;
  std::unordered_set<std::uint64_t> seen;
  std::vector<std::size_t> idx(clouds.size(), 0);
  while (true) {
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      sp += clouds[i].points[idx[i]].p;
      sq += clouds[i].points[idx[i]].q;
    }
    bool fresh = true;
    if (pitch > 0.0) {
      const double kp = sp / pitch, kq = sq / pitch;
      if (std::abs(kp) > 2e9 || std::abs(kq) > 2e9)
        throw std::invalid_argument("brute_force_msum: sums overflow the dedupe lattice");
      const std::uint64_t key =
          (static_cast<std::uint64_t>(static_cast<std::uint32_t>(
               static_cast<std::int32_t>(std::llround(kp))))
           << 32) |
          static_cast<std::uint64_t>(
              static_cast<std::uint32_t>(static_cast<std::int32_t>(std::llround(kq))));
      fresh = seen.insert(key).second;
    }
    if (fresh) out.points.push_back({sp, sq});
    std::size_t i = 0;
    while (i < idx.size()) {
      if (++idx[i] < clouds[i].points.size()) break;
      idx[i] = 0;
      ++i;
    }
    if (i == idx.size()) break;
  }
  if (!(pitch > 0.0)) {
    const auto lt = [](const Point& a, const Point& b) {
      return a.p != b.p ? a.p < b.p : a.q < b.q;
    };
    const auto eq = [](const Point& a, const Point& b) { return a.p == b.p && a.q == b.q; };
    std::sort(out.points.begin(), out.points.end(), lt);
    out.points.erase(std::unique(out.points.begin(), out.points.end(), eq), out.points.end());
  }
  return out;
}

// Lattice sample of an origin-centered disk. Interior points sit within
// pitch/2 per axis of a node; a rim point reaches an in-disk node by stepping
// sqrt(2)*pitch toward the center and snapping, so delta = 2*pitch is a valid
// covering radius.
inline PointCloud sample_disk(double radius, double pitch) {
  if (!(radius > 0.0) || !std::isfinite(radius) || !(pitch > 0.0) || !std::isfinite(pitch))
    throw std::invalid_argument("sample_disk: radius and pitch must be > 0");
  const std::int64_t n = ceil_guarded(radius / pitch);
  if (2 * n + 1 > 40000) throw std::length_error("sample_disk: lattice too fine");
  PointCloud out;
  out.delta = 2.0 * pitch;
  const double r_sq = radius * radius;
  for (std::int64_t i = -n; i <= n; ++i) {
    const double x = static_cast<double>(i) * pitch;
    for (std::int64_t j = -n; j <= n; ++j) {
      const double y = static_cast<double>(j) * pitch;
      if (x * x + y * y <= r_sq) out.points.push_back({x, y});
    }
  }
  return out;
}

// The Minkowski sum of origin-centered disks: a disk of summed radii.
struct DiskSum {
  double radius = 0.0;
  bool contains(Point x, double tol = 0.0) const {
    return std::hypot(x.p, x.q) <= radius + tol;
  }
};

inline DiskSum analytic_disk_sum(const std::vector<double>& radii) {
  if (radii.empty()) throw std::invalid_argument("analytic_disk_sum: no radii");
  double r = 0.0;
  for (const double x : radii) {
    if (!(x > 0.0) || !std::isfinite(x))
      throw std::invalid_argument("analytic_disk_sum: radius must be > 0");
    r += x;
  }
  return {r};
}

inline double chebyshev_to_rect(const Rect& r, Point x) {
  const double dp = std::max({r.p.lo - x.p, x.p - r.p.hi, 0.0});
  const double dq = std::max({r.q.lo - x.q, x.q - r.q.hi, 0.0});
  return std::max(dp, dq);
}

struct SupersetReport {
  std::vector<Point> violations;
  double max_gap = 0.0;  // worst Chebyshev distance of a violating point
};

// Every truth point must lie in the result (closed blocks, tol slack). The
// grid is probed directly when present; violations also report how far
// outside they fall.
inline SupersetReport check_superset(const AggregateResult& result, const PointCloud& truth,
                                     double tol = 1e-9) {
  SupersetReport rep;
  for (const Point& x : truth.points) {
    const bool inside =
        result.grid ? result.grid->covers(x, tol) : result.blocks.contains(x, tol);
    if (inside) continue;
    double gap = std::numeric_limits<double>::infinity();
    for (const Rect& r : result.blocks.blocks) gap = std::min(gap, chebyshev_to_rect(r, x));
    rep.violations.push_back(x);
    rep.max_gap = std::max(rep.max_gap, gap);
  }
  return rep;
}

namespace detail {

inline double chebyshev_dist(Point a, Point b) {
  return std::max(std::abs(a.p - b.p), std::abs(a.q - b.q));
}

// Chebyshev nearest-point queries over a fixed cloud via a uniform cell hash.
// Cell key collisions across 2^32 cells only add scan work, never wrong
// distances.
class NearestPoints {
 public:
  NearestPoints(const std::vector<Point>& pts, double cell) : pts_(pts), cell_(cell) {
    if (pts.empty()) throw std::invalid_argument("nearest: empty cloud");
    if (!(cell_ > 0.0) || !std::isfinite(cell_)) cell_ = 1.0;
    buckets_.reserve(pts.size() / 2 + 1);
    for (std::uint32_t i = 0; i < pts_.size(); ++i)
      buckets_[cell_key(pts_[i])].push_back(i);
  }

  double distance(Point x) const {
    double best = chebyshev_dist(x, pts_[0]);
    const std::int64_t cx = cell_index(x.p), cy = cell_index(x.q);
    const auto scan = [&](std::int64_t a, std::int64_t b) {
      const auto it = buckets_.find(key(a, b));
      if (it == buckets_.end()) return;
      for (const std::uint32_t i : it->second)
        best = std::min(best, chebyshev_dist(x, pts_[i]));
    };
    for (std::int64_t r = 0;; ++r) {
      // Any point in a ring-r cell is at least (r-1)*cell away.
      if (r > 0 && static_cast<double>(r - 1) * cell_ >= best) break;
      if (r == 0) {
        scan(cx, cy);
        continue;
      }
      for (std::int64_t d = -r; d <= r; ++d) {
        scan(cx + d, cy - r);
        scan(cx + d, cy + r);
      }
      for (std::int64_t d = -r + 1; d <= r - 1; ++d) {
        scan(cx - r, cy + d);
        scan(cx + r, cy + d);
      }
    }
    return best;
  }

 private:
  static std::uint64_t key(std::int64_t a, std::int64_t b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(b));
  }
  std::int64_t cell_index(double v) const {
    return static_cast<std::int64_t>(std::floor(v / cell_));
  }
  std::uint64_t cell_key(Point p) const { return key(cell_index(p.p), cell_index(p.q)); }

  const std::vector<Point>& pts_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets_;
};

}  // namespace detail

struct TightnessReport {
  double worst = 0.0;
  bool pass = false;
};

// Worst Chebyshev distance from any result corner to the truth cloud,
// passing when it stays within bound + truth.delta. Requires the truth
// sampling to be an order of magnitude finer than the bound so sampling
// error cannot mask a real excess. Grid results evaluate every lattice node
// adjacent to a marked pixel; exact results evaluate block corners.
inline TightnessReport check_tightness(const AggregateResult& result, const PointCloud& truth,
                                       double bound) {
  if (!(bound > 0.0) || !std::isfinite(bound))
    throw std::invalid_argument("check_tightness: bound must be > 0");
  if (truth.points.empty()) throw std::invalid_argument("check_tightness: empty truth");
  if (!(truth.delta <= bound / 10.0))
    throw std::invalid_argument("check_tightness: truth.delta must be <= bound/10");

  const detail::NearestPoints nearest(truth.points,
                                      std::max(4.0 * truth.delta, bound / 8.0));
  double worst = 0.0;
  if (result.grid) {
    const PixelGrid& g = *result.grid;
    const auto marked = [&g](std::int64_t k, std::int64_t l) {
      return k >= 1 && k <= g.dim_p() && l >= 1 && l <= g.dim_q() && g.test(k, l);
    };
    for (std::int64_t i = 0; i <= g.dim_p(); ++i)
      for (std::int64_t j = 0; j <= g.dim_q(); ++j) {
        if (!(marked(i, j) || marked(i + 1, j) || marked(i, j + 1) || marked(i + 1, j + 1)))
          continue;
        const Point corner{g.origin_p() + static_cast<double>(i) * g.eps_p(),
                           g.origin_q() + static_cast<double>(j) * g.eps_q()};
        worst = std::max(worst, nearest.distance(corner));
      }
  } else {
    for (const Rect& r : result.blocks.blocks)
      for (const Point& c : r.corners()) worst = std::max(worst, nearest.distance(c));
  }
  return {worst, worst <= bound + truth.delta};
}

}  // namespace flexsum
