#pragma once

// Flexibility domains of individual DERs in the (p, q) plane and their
// rectangle discretizations. A domain is a union of pieces; each piece is
// p-interval x [q_lower(p), q_upper(p)] with an exact interval enclosure
// callable on any p-subrange. Sign convention: consumption positive,
// generation negative.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flexsum/geometry.hpp"

namespace flexsum {

using Bounds = Rect;

struct FlexPiece {
  Interval p_range;
  std::function<double(double)> q_lower;
  std::function<double(double)> q_upper;
  // Exact [min q_lower, max q_upper] over any [a, b] inside p_range.
  std::function<Interval(double, double)> q_enclosure;

  bool point_in_p() const { return p_range.length() <= 0.0; }
};

struct FlexDomain {
  std::vector<FlexPiece> pieces;
};

inline FlexPiece box_piece(Interval pr, Interval qr) {
  return {pr, [qr](double) { return qr.lo; }, [qr](double) { return qr.hi; },
          [qr](double, double) { return qr; }};
}

// ---------------------------------------------------------------------------
// DER parameter models.

// Bidirectional inverter: |p| <= p_max, p^2 + q^2 <= s^2. s == p_max is the
// pure disk and is legal.
struct Battery {
  double p_max = 0.0;
  double s = 0.0;
};

// Generation-only inverter: p in [-p_max, 0], p^2 + q^2 <= s^2.
struct PvInverter {
  double p_max = 0.0;
  double s = 0.0;
};

// Three-piece induction machine envelope: a small box around standby plus
// upper and lower generation lobes q in [-sqrt(s1^2 - alpha p^2), 0] and
// [0, sqrt(s2^2 - alpha p^2)] for p in [-p_max, -p0].
struct WindInverter {
  double p_max = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double alpha = 1.0;
  double p0 = 0.0;
  double q0 = 0.0;
};

// Two-state load: off at the origin or on at (p_on, gamma * p_on), gamma
// being the constant power factor ratio q/p while running.
struct SwitchingLoad {
  double p_on = 0.0;
  double gamma = 0.0;

  double q_on() const { return gamma * p_on; }
};

using DerSpec = std::variant<Battery, PvInverter, WindInverter, SwitchingLoad>;

struct EnsembleSpec {
  std::vector<DerSpec> ders;
  std::uint64_t seed = 0;
  std::string provenance;
};

inline std::string_view der_type_name(const DerSpec& d) {
  struct V {
    std::string_view operator()(const Battery&) const { return "battery"; }
    std::string_view operator()(const PvInverter&) const { return "pv"; }
    std::string_view operator()(const WindInverter&) const { return "wind"; }
    std::string_view operator()(const SwitchingLoad&) const { return "switching"; }
  };
  return std::visit(V{}, d);
}

inline void validate(const Battery& b) {
  if (!std::isfinite(b.p_max) || !std::isfinite(b.s) || b.p_max <= 0.0 || b.s < b.p_max)
    throw std::invalid_argument("battery: need 0 < p_max <= s");
}

inline void validate(const PvInverter& v) {
  if (!std::isfinite(v.p_max) || !std::isfinite(v.s) || v.p_max <= 0.0 || v.s < v.p_max)
    throw std::invalid_argument("pv: need 0 < p_max <= s");
}

inline void validate(const WindInverter& w) {
  const bool finite = std::isfinite(w.p_max) && std::isfinite(w.s1) && std::isfinite(w.s2) &&
                      std::isfinite(w.alpha) && std::isfinite(w.p0) && std::isfinite(w.q0);
  // p0 = q0 = 0 is legal: the standby box degenerates to the origin point.
  if (!finite || w.p_max <= 0.0 || w.alpha <= 0.0 || w.p0 < 0.0 || w.p0 > w.p_max ||
      w.q0 < 0.0)
    throw std::invalid_argument("wind: need 0 <= p0 <= p_max, alpha > 0, q0 >= 0");
  const double reach = std::sqrt(w.alpha) * w.p_max;
  if (!(w.s1 > reach) || !(w.s2 > reach))
    throw std::invalid_argument("wind: need s1, s2 > sqrt(alpha) * p_max");
}

inline void validate(const SwitchingLoad& s) {
  if (!std::isfinite(s.p_on) || !std::isfinite(s.gamma) || s.p_on <= 0.0 || s.gamma <= 0.0)
    throw std::invalid_argument("switching: need p_on > 0, gamma > 0");
}

inline void validate(const DerSpec& d) {
  std::visit([](const auto& m) { validate(m); }, d);
}

namespace detail {

// max over [a, b] of sqrt(s2 - alpha p^2): attained at the p of smallest
// magnitude. Radicand clamped against fp dust at the rim.
inline double arc_peak(double s_sq, double alpha, double a, double b) {
  const double pm = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(std::abs(a), std::abs(b));
  return std::sqrt(std::max(0.0, s_sq - alpha * pm * pm));
}

inline FlexPiece disk_band_piece(double p_lo, double p_hi, double s) {
  const double s_sq = s * s;
  auto hi = [s_sq](double p) { return std::sqrt(std::max(0.0, s_sq - p * p)); };
  return {{p_lo, p_hi},
          [hi](double p) { return -hi(p); },
          hi,
          [s_sq](double a, double b) {
            const double top = arc_peak(s_sq, 1.0, a, b);
            return Interval{-top, top};
          }};
}

}  // namespace detail

inline FlexDomain domain_of(const Battery& b) {
  validate(b);
  return {{detail::disk_band_piece(-b.p_max, b.p_max, b.s)}};
}

inline FlexDomain domain_of(const PvInverter& v) {
  validate(v);
  return {{detail::disk_band_piece(-v.p_max, 0.0, v.s)}};
}

inline FlexDomain domain_of(const WindInverter& w) {
  validate(w);
  const double a = w.alpha, s1_sq = w.s1 * w.s1, s2_sq = w.s2 * w.s2;
  FlexPiece standby = box_piece({-w.p0, 0.0}, {-w.q0, w.q0});
  FlexPiece upper{{-w.p_max, -w.p0},
                  [](double) { return 0.0; },
                  [s2_sq, a](double p) { return std::sqrt(std::max(0.0, s2_sq - a * p * p)); },
                  [s2_sq, a](double lo, double hi) {
                    return Interval{0.0, detail::arc_peak(s2_sq, a, lo, hi)};
                  }};
  FlexPiece lower{{-w.p_max, -w.p0},
                  [s1_sq, a](double p) { return -std::sqrt(std::max(0.0, s1_sq - a * p * p)); },
                  [](double) { return 0.0; },
                  [s1_sq, a](double lo, double hi) {
                    return Interval{-detail::arc_peak(s1_sq, a, lo, hi), 0.0};
                  }};
  return {{standby, upper, lower}};
}

inline FlexDomain domain_of(const SwitchingLoad& s) {
  validate(s);
  const double q_on = s.q_on();
  return {{box_piece({0.0, 0.0}, {0.0, 0.0}), box_piece({s.p_on, s.p_on}, {q_on, q_on})}};
}

inline FlexDomain domain_of(const DerSpec& d) {
  return std::visit([](const auto& m) { return domain_of(m); }, d);
}

inline Bounds bounds_of(const FlexDomain& d) {
  if (d.pieces.empty()) throw std::invalid_argument("bounds_of: empty domain");
  Bounds b{{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()},
           {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()}};
  for (const FlexPiece& piece : d.pieces) {
    const Interval qe = piece.q_enclosure(piece.p_range.lo, piece.p_range.hi);
    b.p.lo = std::min(b.p.lo, piece.p_range.lo);
    b.p.hi = std::max(b.p.hi, piece.p_range.hi);
    b.q.lo = std::min(b.q.lo, qe.lo);
    b.q.hi = std::max(b.q.hi, qe.hi);
  }
  return b;
}

inline bool contains(const FlexDomain& d, Point x, double tol = 0.0) {
  for (const FlexPiece& piece : d.pieces) {
    if (!piece.p_range.contains(x.p, tol)) continue;
    const double pc = std::clamp(x.p, piece.p_range.lo, piece.p_range.hi);
    if (x.q >= piece.q_lower(pc) - tol && x.q <= piece.q_upper(pc) + tol) return true;
  }
  return false;
}

namespace detail {

// Equal division of [lo, hi] into ceil(len / w) parts of width <= w, exact
// endpoints. Calls fn(a, b, first, last) per part in ascending order.
template <class Fn>
void for_each_part(double lo, double hi, double w, Fn&& fn) {
  const double len = hi - lo;
  if (len <= 0.0) {
    fn(lo, hi);
    return;
  }
  if (!(w > 0.0)) throw std::invalid_argument("discretize: zero width on a non-degenerate axis");
  const std::int64_t n = std::max<std::int64_t>(1, ceil_guarded(len / w));
  const double step = len / static_cast<double>(n);
  for (std::int64_t j = 0; j < n; ++j) {
    const double a = (j == 0) ? lo : lo + static_cast<double>(j) * step;
    const double b = (j == n - 1) ? hi : lo + static_cast<double>(j + 1) * step;
    fn(a, b);
  }
}

}  // namespace detail

// One rectangle per piece column (p split by w_p, q kept as the exact column
// enclosure). Point-in-p pieces pass through verbatim.
inline RectUnion discretize_columns(const FlexDomain& d, double w_p) {
  if (w_p < 0.0 || !std::isfinite(w_p)) throw std::invalid_argument("discretize: negative width");
  RectUnion out;
  for (const FlexPiece& piece : d.pieces) {
    detail::for_each_part(piece.p_range.lo, piece.p_range.hi, w_p, [&](double a, double b) {
      out.blocks.push_back({{a, b}, piece.q_enclosure(a, b)});
    });
  }
  return out;
}

// Full tiling: p split by w_p, each column's enclosure split by w_q.
inline RectUnion discretize(const FlexDomain& d, double w_p, double w_q) {
  if (w_p < 0.0 || w_q < 0.0 || !std::isfinite(w_p) || !std::isfinite(w_q))
    throw std::invalid_argument("discretize: negative width");
  RectUnion out;
  for (const FlexPiece& piece : d.pieces) {
    detail::for_each_part(piece.p_range.lo, piece.p_range.hi, w_p, [&](double a, double b) {
      const Interval qe = piece.q_enclosure(a, b);
      detail::for_each_part(qe.lo, qe.hi, w_q, [&](double qa, double qb) {
        out.blocks.push_back({{a, b}, {qa, qb}});
      });
    });
  }
  return out;
}

// Tile count of discretize(d, w_p, w_q) without materializing.
inline std::int64_t stacked_tile_count(const FlexDomain& d, double w_p, double w_q) {
  if (w_p < 0.0 || w_q < 0.0) throw std::invalid_argument("discretize: negative width");
  std::int64_t n = 0;
  for (const FlexPiece& piece : d.pieces) {
    detail::for_each_part(piece.p_range.lo, piece.p_range.hi, w_p, [&](double a, double b) {
      const Interval qe = piece.q_enclosure(a, b);
      const double h = qe.length();
      if (h > 0.0 && !(w_q > 0.0))
        throw std::invalid_argument("discretize: zero width on a non-degenerate axis");
      n += (h <= 0.0) ? 1 : std::max<std::int64_t>(1, ceil_guarded(h / w_q));
    });
  }
  return n;
}

}  // namespace flexsum
