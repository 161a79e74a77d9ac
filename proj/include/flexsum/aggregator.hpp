#pragma once

// Folds N DER flexibility domains into a guaranteed superset of their
// Minkowski sum. Each fold either sums the operand block sets exactly (when
// the pairwise product stays within the pixel budget) or rasterizes all
// pairwise block sums onto a bit grid and hands the marked set forward as
// column runs. Every step only ever grows the represented set, so the final
// result covers the true sum by construction.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "flexsum/der_models.hpp"

namespace flexsum {

enum class GridMode { PerStep, FixedFinal };

struct TightnessConfig {
  double epsilon = 0.1;
  std::optional<std::int64_t> cap_p;  // upper bound on grid columns, when set
  std::optional<std::int64_t> cap_q;  // upper bound on grid rows, when set
  GridMode grid_mode = GridMode::PerStep;
  bool keep_step_blocks = false;  // snapshot the accumulator after every fold
};

struct BinCounts {
  std::int64_t m_p = 1;
  std::int64_t m_q = 1;
};

struct DerWidths {
  double w_p = 0.0;
  double w_q = 0.0;
};

struct PixelSizes {
  double eps_p = 0.0;
  double eps_q = 0.0;
};

struct StepStats {
  int step = 0;                  // 1-based; fold `step` joins DER step+1
  std::int64_t acc_blocks = 0;   // accumulator operand count entering the fold
  std::int64_t next_blocks = 0;  // materialized blocks of the incoming domain
  std::int64_t next_tiles = 0;   // stacked tile count used for the route decision
  bool exact = false;
  double eps_p = 0.0;            // pitch used (0 when exact)
  double eps_q = 0.0;
  std::int64_t dim_p = 0;        // grid dims (0 when exact)
  std::int64_t dim_q = 0;
  std::int64_t occupied = 0;     // marked pixels, or block count when exact
  double seconds = 0.0;
};

struct AggregateResult {
  RectUnion blocks;
  std::optional<PixelGrid> grid;       // absent when the fold chain stayed exact
  std::vector<StepStats> steps;
  std::vector<RectUnion> step_blocks;  // per-fold snapshots, only when requested
};

// Pixel budget for the whole run: ceil(total_range / eps) per axis, at least
// one bin so degenerate axes stay representable.
inline BinCounts bin_counts(double total_p, double total_q, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw std::invalid_argument("bin_counts: eps must be > 0");
  if (total_p < 0.0 || total_q < 0.0) throw std::invalid_argument("bin_counts: negative range");
  return {std::max<std::int64_t>(1, ceil_guarded(total_p / eps)),
          std::max<std::int64_t>(1, ceil_guarded(total_q / eps))};
}

// Per-DER discretization widths: eps scaled by the DER's share of the total
// extent per axis; zero for degenerate extents (and everywhere when the whole
// axis is degenerate).
inline std::vector<DerWidths> discretization_widths(const std::vector<Bounds>& bounds,
                                                    double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw std::invalid_argument("discretization_widths: eps must be > 0");
  double total_p = 0.0, total_q = 0.0;
  for (const Bounds& b : bounds) {
    total_p += b.p.length();
    total_q += b.q.length();
  }
  std::vector<DerWidths> out;
  out.reserve(bounds.size());
  for (const Bounds& b : bounds)
    out.push_back({total_p > 0.0 ? eps * b.p.length() / total_p : 0.0,
                   total_q > 0.0 ? eps * b.q.length() / total_q : 0.0});
  return out;
}

// Pixel pitch for a fold whose partial sum spans partial_p x partial_q out of
// total_p x total_q. PerStep scales eps by the covered share per axis;
// FixedFinal quotes the final pitch eps. An axis cap, when set, is an upper
// bound on bins: the pitch grows to partial/cap as soon as the formula pitch
// would need more. A degenerate axis gets pitch 1 (its window is one pixel).
// The fold engine derives window geometry from the same rules plus the
// accumulated content envelope; see aggregate_domains.
inline PixelSizes pixel_sizes(const TightnessConfig& cfg, double partial_p, double partial_q,
                              double total_p, double total_q) {
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon))
    throw std::invalid_argument("pixel_sizes: eps must be > 0");
  if (partial_p < 0.0 || partial_q < 0.0 || total_p < 0.0 || total_q < 0.0)
    throw std::invalid_argument("pixel_sizes: negative range");
  const auto axis = [&cfg](double partial, double total, std::optional<std::int64_t> cap) {
    double h;
    if (cfg.grid_mode == GridMode::FixedFinal)
      h = cfg.epsilon;
    else
      h = (total > 0.0 && partial > 0.0) ? cfg.epsilon * partial / total : 1.0;
    if (cap && partial > 0.0) h = std::max(h, partial / static_cast<double>(*cap));
    return h;
  };
  return {axis(partial_p, total_p, cfg.cap_p), axis(partial_q, total_q, cfg.cap_q)};
}

// Rasterizes every pairwise block sum of a and b onto g. The window must
// cover all the sums; out-of-window content throws (see raster_axis_span).
inline void pixelized_sum(PixelGrid& g, const RectUnion& a, const RectUnion& b) {
  for (const Rect& ra : a.blocks)
    for (const Rect& rb : b.blocks) mark_range(g, rasterize_block(ra + rb, g));
}

namespace detail {

// Hard memory guard on the exact route: a near-budget pairwise product would
// otherwise be free to allocate gigabytes of blocks.
inline constexpr double kExactBlockGuard = 4e6;

struct AccContent {
  RectUnion blocks;  // column runs, the operand handed to the next fold
  Rect bbox;
};

inline AccContent grid_content(const PixelGrid& g) {
  AccContent out;
  std::int64_t kmin = 0, kmax = 0, lmin = 0, lmax = 0;
  for (std::int64_t k = 1; k <= g.dim_p(); ++k) {
    const auto runs = g.column_runs(k);
    if (runs.empty()) continue;
    if (kmin == 0) kmin = k;
    kmax = k;
    lmin = (lmin == 0) ? runs.front().lo : std::min(lmin, runs.front().lo);
    lmax = std::max(lmax, runs.back().hi);
    const double p0 = g.origin_p() + static_cast<double>(k - 1) * g.eps_p();
    const double p1 = g.origin_p() + static_cast<double>(k) * g.eps_p();
    for (const BitRun& r : runs)
      out.blocks.blocks.push_back(
          {{p0, p1},
           {g.origin_q() + static_cast<double>(r.lo - 1) * g.eps_q(),
            g.origin_q() + static_cast<double>(r.hi) * g.eps_q()}});
  }
  if (kmin == 0) throw std::logic_error("aggregate: empty accumulator grid");
  out.bbox = {{g.origin_p() + static_cast<double>(kmin - 1) * g.eps_p(),
               g.origin_p() + static_cast<double>(kmax) * g.eps_p()},
              {g.origin_q() + static_cast<double>(lmin - 1) * g.eps_q(),
               g.origin_q() + static_cast<double>(lmax) * g.eps_q()}};
  return out;
}

struct WindowAxis {
  double origin = 0.0;
  double pitch = 1.0;
  std::int64_t dim = 1;
};

// One PerStep window axis. Uncapped: pristine origin, budget dims, pitch
// scaled by the covered share; window extent m*pitch >= partial range, which
// makes the marked content fit fold over fold. A binding cap coarsens the
// pitch, and the window is then sized to the content envelope (coverage slack
// may overhang the pristine range) within min(cap, m) bins.
inline WindowAxis perstep_axis(double pristine_lo, double partial, double total,
                               std::int64_t m_axis, double eps,
                               std::optional<std::int64_t> cap, Interval env) {
  if (partial <= 0.0 || total <= 0.0) return {pristine_lo, 1.0, 1};
  const double h = eps * partial / total;
  if (!cap) return {pristine_lo, h, m_axis};
  const std::int64_t cap_eff = std::min(*cap, m_axis);
  const double span = env.length();
  const double pitch = std::max(h, span / static_cast<double>(cap_eff));
  const std::int64_t dim = std::max<std::int64_t>(1, ceil_guarded(span / pitch));
  return {env.lo, pitch, dim};
}

// One FixedFinal window axis: every fold shares a lattice with a common
// anchor, so runs handed between folds stay lattice-aligned. The anchor sits
// N*lattice below the lowest partial pristine infimum: each fold can push the
// enclosed lower edge one pixel down (lattice-aligned block edges land in the
// lower pixel), so content drifts at most (N-1)*lattice below pristine and
// never reaches the origin. A binding cap coarsens the pitch off the lattice
// (the superset direction survives; the shared lattice tightness budget does
// not). Coarse capped pixels can drag the content envelope below the shared
// anchor, so the window origin follows the envelope down when needed; with
// the lattice pitch the drift bound keeps the envelope above the anchor and
// the origin never moves.
inline WindowAxis fixedfinal_axis(double anchor, double lattice,
                                  std::optional<std::int64_t> cap, Interval env) {
  const double origin = std::min(anchor, env.lo);
  const double span = std::max(0.0, env.hi - origin);
  double pitch = lattice;
  if (cap) pitch = std::max(pitch, span / static_cast<double>(*cap));
  const std::int64_t dim = std::max<std::int64_t>(1, ceil_guarded(span / pitch));
  return {origin, pitch, dim};
}

}  // namespace detail

inline AggregateResult aggregate_domains(const std::vector<FlexDomain>& domains,
                                         const TightnessConfig& cfg) {
  const std::size_t n = domains.size();
  if (n == 0) throw std::invalid_argument("aggregate: need at least one domain");
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon))
    throw std::invalid_argument("aggregate: eps must be > 0");
  if ((cfg.cap_p && *cfg.cap_p < 1) || (cfg.cap_q && *cfg.cap_q < 1))
    throw std::invalid_argument("aggregate: caps must be >= 1");

  std::vector<Bounds> bounds;
  bounds.reserve(n);
  for (const FlexDomain& d : domains) bounds.push_back(bounds_of(d));

  double total_p = 0.0, total_q = 0.0;
  for (const Bounds& b : bounds) {
    total_p += b.p.length();
    total_q += b.q.length();
  }
  const BinCounts m = bin_counts(total_p, total_q, cfg.epsilon);
  const std::vector<DerWidths> widths = discretization_widths(bounds, cfg.epsilon);

  AggregateResult out;
  if (n == 1) {
    out.blocks = discretize(domains[0], widths[0].w_p, widths[0].w_q);
    return out;
  }

  // Pristine prefix bounds: infimum and extent of the partial sum over the
  // first t+1 DERs, before any enclosure slack.
  std::vector<double> pre_inf_p(n), pre_inf_q(n), pre_rng_p(n), pre_rng_q(n);
  {
    double ip = 0.0, iq = 0.0, rp = 0.0, rq = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      ip += bounds[t].p.lo;
      iq += bounds[t].q.lo;
      rp += bounds[t].p.length();
      rq += bounds[t].q.length();
      pre_inf_p[t] = ip;
      pre_inf_q[t] = iq;
      pre_rng_p[t] = rp;
      pre_rng_q[t] = rq;
    }
  }
  double anchor_p = pre_inf_p[1], anchor_q = pre_inf_q[1];
  for (std::size_t t = 2; t < n; ++t) {
    anchor_p = std::min(anchor_p, pre_inf_p[t]);
    anchor_q = std::min(anchor_q, pre_inf_q[t]);
  }
  const double lattice = cfg.epsilon / (2.0 * static_cast<double>(n));
  // Headroom for the per-fold lower-edge drift; see fixedfinal_axis.
  anchor_p -= 0.5 * cfg.epsilon;
  anchor_q -= 0.5 * cfg.epsilon;

  struct Acc {
    bool on_grid = false;
    RectUnion blocks;               // exact operand when !on_grid
    std::optional<PixelGrid> grid;  // marked set when on_grid
    Rect content;                   // tight bbox of the represented set
  } acc;
  acc.content = bounds[0];

  const double budget = static_cast<double>(m.m_p) * static_cast<double>(m.m_q);

  for (std::size_t t = 1; t < n; ++t) {
    const auto fold_start = std::chrono::steady_clock::now();
    const bool final_fold = (t == n - 1);
    const FlexDomain& next = domains[t];

    // Operand entering the fold. The accumulator at fold 1 is DER 1 itself,
    // bookkept at its stacked tile count like any other incoming domain.
    detail::AccContent handed;
    std::int64_t m1;
    if (t == 1) {
      m1 = stacked_tile_count(domains[0], widths[0].w_p, widths[0].w_q);
    } else if (acc.on_grid) {
      handed = detail::grid_content(*acc.grid);
      acc.content = handed.bbox;
      m1 = static_cast<std::int64_t>(handed.blocks.size());
    } else {
      m1 = static_cast<std::int64_t>(acc.blocks.size());
    }
    const std::int64_t m2 = stacked_tile_count(next, widths[t].w_p, widths[t].w_q);

    const double product = static_cast<double>(m1) * static_cast<double>(m2);
    bool take_exact = product <= budget && product <= detail::kExactBlockGuard;
    // A zero-thickness axis never benefits from pixelizing: enclosure would
    // only inflate an exact degenerate set.
    if (total_p <= 0.0 || total_q <= 0.0) take_exact = true;

    StepStats st;
    st.step = static_cast<int>(t);
    st.acc_blocks = m1;
    st.next_tiles = m2;

    if (take_exact) {
      RectUnion first_ops;
      if (t == 1) first_ops = discretize_columns(domains[0], widths[0].w_p);
      const RectUnion& acc_ops =
          (t == 1) ? first_ops : (acc.on_grid ? handed.blocks : acc.blocks);
      const RectUnion next_ops = discretize_columns(next, widths[t].w_p);
      RectUnion sum = msum(acc_ops, next_ops);
      dedupe_blocks(sum.blocks);
      acc.blocks = std::move(sum);
      acc.on_grid = false;
      acc.grid.reset();
      acc.content = acc.blocks.bounding_box();
      st.exact = true;
      st.next_blocks = static_cast<std::int64_t>(next_ops.size());
      st.occupied = static_cast<std::int64_t>(acc.blocks.size());
    } else {
      const Rect env{acc.content.p + bounds[t].p, acc.content.q + bounds[t].q};
      detail::WindowAxis wp, wq;
      if (cfg.grid_mode == GridMode::PerStep) {
        wp = detail::perstep_axis(pre_inf_p[t], pre_rng_p[t], total_p, m.m_p, cfg.epsilon,
                                  cfg.cap_p, env.p);
        wq = detail::perstep_axis(pre_inf_q[t], pre_rng_q[t], total_q, m.m_q, cfg.epsilon,
                                  cfg.cap_q, env.q);
      } else {
        wp = detail::fixedfinal_axis(anchor_p, lattice, cfg.cap_p, env.p);
        wq = detail::fixedfinal_axis(anchor_q, lattice, cfg.cap_q, env.q);
      }
      PixelGrid grid(wp.origin, wq.origin, wp.pitch, wq.pitch, wp.dim, wq.dim);

      // Fresh enclosure of the incoming domain at the window pitch, except
      // the final PerStep fold, which keeps the per-DER budget widths so the
      // last enclosure step honors the per-DER tightness shares.
      const double col_w =
          (cfg.grid_mode == GridMode::PerStep && final_fold) ? widths[t].w_p : wp.pitch;
      const RectUnion next_ops = discretize_columns(next, col_w);

      RectUnion first_ops;
      if (t == 1) {
        const double first_w =
            (cfg.grid_mode == GridMode::PerStep && final_fold) ? widths[0].w_p : wp.pitch;
        first_ops = discretize_columns(domains[0], first_w);
      }
      const RectUnion& acc_ops =
          (t == 1) ? first_ops : (acc.on_grid ? handed.blocks : acc.blocks);

      pixelized_sum(grid, acc_ops, next_ops);

      st.next_blocks = static_cast<std::int64_t>(next_ops.size());
      st.eps_p = wp.pitch;
      st.eps_q = wq.pitch;
      st.dim_p = wp.dim;
      st.dim_q = wq.dim;
      st.occupied = grid.occupied();
      acc.grid = std::move(grid);
      acc.on_grid = true;
      acc.blocks.blocks.clear();
      // Content bbox refreshes from the marked set when the next fold hands
      // the runs forward.
    }

    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - fold_start)
                     .count();
    out.steps.push_back(st);
    if (cfg.keep_step_blocks)
      out.step_blocks.push_back(acc.on_grid ? grid_to_rect_union(*acc.grid) : acc.blocks);
  }

  if (acc.on_grid) {
    out.blocks = grid_to_rect_union(*acc.grid);
    out.grid = std::move(acc.grid);
  } else {
    out.blocks = std::move(acc.blocks);
  }
  return out;
}

inline AggregateResult aggregate(const EnsembleSpec& spec, const TightnessConfig& cfg) {
  if (spec.ders.empty()) throw std::invalid_argument("aggregate: ensemble has no DERs");
  std::vector<FlexDomain> domains;
  domains.reserve(spec.ders.size());
  for (const DerSpec& d : spec.ders) domains.push_back(domain_of(d));
  return aggregate_domains(domains, cfg);
}

}  // namespace flexsum
