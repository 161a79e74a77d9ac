#pragma once

// Runtime measurement and scaling-law fits for the aggregation pipeline:
// repeat-and-take-the-median timing, (n, eps) sweeps over replicated
// ensembles, log-log slope estimation, and deterministic self-checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <stdexcept>
#include <vector>

#include "flexsum/aggregator.hpp"

namespace flexsum {

struct BenchConfig {
  int warmup = 1;   // discarded runs before measurement
  int repeats = 3;  // measured runs; the median is reported
};

// Median wall time of fn() over cfg.repeats runs, after cfg.warmup discarded
// warm-up runs. Even repeat counts report the upper median.
template <typename F>
double timed_median_seconds(F&& fn, BenchConfig cfg = {}) {
  if (cfg.warmup < 0 || cfg.repeats < 1)
    throw std::invalid_argument("bench: need warmup >= 0 and repeats >= 1");
  for (int i = 0; i < cfg.warmup; ++i) fn();
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(cfg.repeats));
  for (int i = 0; i < cfg.repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    times.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  const auto mid = times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2);
  std::nth_element(times.begin(), mid, times.end());
  return *mid;
}

struct BenchRecord {
  std::size_t n = 0;
  double eps = 0.0;
  std::int64_t cap_p = 0;  // 0 means uncapped
  std::int64_t cap_q = 0;
  double wall_time_s = 0.0;
  std::int64_t peak_blocks = 0;  // most rectangles simultaneously live in a fold
  std::int64_t occupied_pixels = 0;
  int repeats = 0;
  std::uint64_t seed = 0;
};

inline BenchRecord bench_aggregate(const EnsembleSpec& spec, const TightnessConfig& cfg,
                                   BenchConfig bc = {}) {
  AggregateResult last;
  const double wall = timed_median_seconds([&] { last = aggregate(spec, cfg); }, bc);

  BenchRecord rec;
  rec.n = spec.ders.size();
  rec.eps = cfg.epsilon;
  rec.cap_p = cfg.cap_p.value_or(0);
  rec.cap_q = cfg.cap_q.value_or(0);
  rec.wall_time_s = wall;
  for (const StepStats& st : last.steps) {
    const std::int64_t live =
        st.acc_blocks + st.next_blocks + (st.exact ? st.occupied : std::int64_t{0});
    rec.peak_blocks = std::max(rec.peak_blocks, live);
  }
  if (rec.peak_blocks == 0) rec.peak_blocks = static_cast<std::int64_t>(last.blocks.size());
  rec.occupied_pixels =
      last.grid ? last.grid->occupied() : static_cast<std::int64_t>(last.blocks.size());
  rec.repeats = bc.repeats;
  rec.seed = spec.seed;
  return rec;
}

// Repeats the base device list cyclically until the ensemble has n devices.
inline EnsembleSpec replicate(const EnsembleSpec& base, std::size_t n) {
  if (base.ders.empty()) throw std::invalid_argument("replicate: empty base ensemble");
  EnsembleSpec out;
  out.seed = base.seed;
  out.provenance = base.provenance;
  out.ders.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.ders.push_back(base.ders[i % base.ders.size()]);
  return out;
}

// One timed record per (n, eps) combination, n outer and eps inner, over
// replicated copies of the base ensemble. Ensembles are built before the
// timer starts. One warm-up run per cell is discarded; wall time is the
// median of `repeats` >= 3 runs. The optional parallel mode times independent
// cells concurrently (each cell keeps its own timer); record order is the
// same either way.
inline std::vector<BenchRecord> sweep(const EnsembleSpec& base,
                                      const std::vector<std::size_t>& n_values,
                                      const std::vector<double>& eps_values,
                                      std::optional<std::int64_t> cap_p,
                                      std::optional<std::int64_t> cap_q, int repeats,
                                      std::uint64_t seed, GridMode mode = GridMode::PerStep,
                                      bool parallel = false) {
  if (n_values.empty() || eps_values.empty())
    throw std::invalid_argument("sweep: empty sweep axis");
  if (repeats < 3) throw std::invalid_argument("sweep: need repeats >= 3");

  struct Cell {
    EnsembleSpec spec;
    TightnessConfig cfg;
  };
  std::vector<Cell> cells;
  for (const std::size_t n : n_values) {
    EnsembleSpec spec = replicate(base, n);
    spec.seed = seed;
    for (const double eps : eps_values) {
      TightnessConfig cfg;
      cfg.epsilon = eps;
      cfg.cap_p = cap_p;
      cfg.cap_q = cap_q;
      cfg.grid_mode = mode;
      cells.push_back({spec, cfg});
    }
  }

  const BenchConfig bc{1, repeats};
  std::vector<BenchRecord> records;
  records.reserve(cells.size());
  if (!parallel) {
    for (const Cell& c : cells) records.push_back(bench_aggregate(c.spec, c.cfg, bc));
  } else {
    std::vector<std::future<BenchRecord>> futures;
    futures.reserve(cells.size());
    for (const Cell& c : cells)
      futures.push_back(std::async(std::launch::async,
                                   [&c, bc] { return bench_aggregate(c.spec, c.cfg, bc); }));
    for (auto& f : futures) records.push_back(f.get());
  }
  return records;
}

// Unweighted least-squares slope of ln(y) against ln(x).
inline double fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit: need >= 2 matched samples");
  std::vector<double> lx, ly;
  lx.reserve(xs.size());
  ly.reserve(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(xs[i]) || !std::isfinite(ys[i]))
      throw std::invalid_argument("fit: samples must be positive");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(ly.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(den > 0.0)) throw std::invalid_argument("fit: x values must not all coincide");
  return num / den;
}

// Scaling-law fit with sanity gates: at least four samples spanning a >= 4x
// range of x, so the slope is a trend rather than a two-point artifact.
inline double fit_scaling(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() < 4) throw std::invalid_argument("fit: need >= 4 samples for a scaling law");
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  if (!(*lo > 0.0) || *hi < 4.0 * *lo)
    throw std::invalid_argument("fit: x range must span at least 4x");
  return fit_loglog(xs, ys);
}

enum class SweepAxis { N, InvEps };

struct ScalingFit {
  SweepAxis axis = SweepAxis::N;
  double slope = 0.0;
  double r2 = 0.0;
};

// Slope of log(wall_time) against log(n) or log(1/eps) over records that
// vary only along the chosen axis; everything off-axis must be constant.
inline ScalingFit fit_scaling(const std::vector<BenchRecord>& records, SweepAxis axis) {
  if (records.size() < 4)
    throw std::invalid_argument("fit: need >= 4 records for a scaling law");
  for (const BenchRecord& r : records) {
    const BenchRecord& f = records.front();
    const bool fixed_ok = axis == SweepAxis::N ? r.eps == f.eps : r.n == f.n;
    if (!fixed_ok || r.cap_p != f.cap_p || r.cap_q != f.cap_q)
      throw std::invalid_argument("fit: records vary off the swept axis");
  }
  std::vector<double> xs, ys;
  for (const BenchRecord& r : records) {
    xs.push_back(axis == SweepAxis::N ? static_cast<double>(r.n) : 1.0 / r.eps);
    ys.push_back(r.wall_time_s);
  }
  ScalingFit fit;
  fit.axis = axis;
  fit.slope = fit_scaling(xs, ys);
  // Squared correlation of the log-log samples.
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(ly.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

// Fits synthetic records whose wall time follows an exact quadratic law in n;
// validates the record-level fit plumbing end to end and must return 2.
inline double synthetic_selftest_slope() {
  std::vector<BenchRecord> records;
  for (const std::size_t n : {10, 20, 40, 80}) {
    BenchRecord r;
    r.n = n;
    r.eps = 0.16;
    r.wall_time_s = 3e-3 * static_cast<double>(n) * static_cast<double>(n);
    r.repeats = 3;
    records.push_back(r);
  }
  return fit_scaling(records, SweepAxis::N).slope;
}

struct PixelLawRow {
  std::size_t n = 0;
  std::int64_t measured = 0;
  std::int64_t expected = 0;
};

struct PixelLawReport {
  std::vector<PixelLawRow> rows;
  bool pass = false;
};

// Folds n identical axis-aligned squares of side `delta`: the result is the
// square [0, n*delta]^2, so the occupied count must equal
// ceil(n*delta/eps)^2 exactly (final-step pitch is eps on both axes). n = 1
// is the plain discretization and follows the same formula with its block
// count. Deterministic geometry, no timing noise.
inline PixelLawReport pixel_count_law_check(const std::vector<std::size_t>& n_values,
                                            double delta, double eps) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("pixel law: delta must be > 0");
  FlexDomain square;
  square.pieces.push_back(box_piece({0.0, delta}, {0.0, delta}));

  PixelLawReport report;
  report.pass = true;
  for (const std::size_t n : n_values) {
    if (n == 0) throw std::invalid_argument("pixel law: n must be >= 1");
    TightnessConfig cfg;
    cfg.epsilon = eps;
    const AggregateResult res = aggregate_domains(std::vector<FlexDomain>(n, square), cfg);
    PixelLawRow row;
    row.n = n;
    const double side = static_cast<double>(n) * delta;
    const std::int64_t bins = std::max<std::int64_t>(1, ceil_guarded(side / eps));
    row.expected = bins * bins;
    row.measured =
        res.grid ? res.grid->occupied() : static_cast<std::int64_t>(res.blocks.size());
    report.pass = report.pass && row.measured == row.expected;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace flexsum
