#include <algorithm>
#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "flexsum/oracle.hpp"

using namespace flexsum;

namespace {

FlexDomain unit_square() {
  FlexDomain d;
  d.pieces.push_back(box_piece({0.0, 1.0}, {0.0, 1.0}));
  return d;
}

bool cloud_has(const PointCloud& cloud, Point x, double tol = 1e-12) {
  for (const Point& s : cloud.points)
    if (std::abs(s.p - x.p) <= tol && std::abs(s.q - x.q) <= tol) return true;
  return false;
}

}  // namespace

TEST_CASE("bin counts divide the total extent by eps, at least one bin", "[aggregator]") {
  const BinCounts m = bin_counts(10.0, 5.0, 0.5);
  CHECK(m.m_p == 20);
  CHECK(m.m_q == 10);
  CHECK(bin_counts(1.6, 1.76, 0.2).m_p == 8);
  CHECK(bin_counts(0.05, 0.0, 0.5).m_p == 1);
  CHECK(bin_counts(0.0, 0.0, 0.5).m_q == 1);
  CHECK(bin_counts(1.0001, 0.0, 0.5).m_p == 3);
  CHECK_THROWS_AS(bin_counts(1.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(bin_counts(-1.0, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("discretization widths split eps by extent share", "[aggregator]") {
  const std::vector<Bounds> bounds = {{{0.0, 3.0}, {0.0, 1.0}}, {{-1.0, 0.0}, {0.0, 3.0}}};
  const std::vector<DerWidths> w = discretization_widths(bounds, 0.4);
  REQUIRE(w.size() == 2);
  CHECK(w[0].w_p == Catch::Approx(0.3));
  CHECK(w[1].w_p == Catch::Approx(0.1));
  CHECK(w[0].w_q == Catch::Approx(0.1));
  CHECK(w[1].w_q == Catch::Approx(0.3));
  CHECK(w[0].w_p + w[1].w_p == Catch::Approx(0.4));

  const std::vector<Bounds> flat = {{{0.0, 2.0}, {1.0, 1.0}}, {{0.0, 2.0}, {5.0, 5.0}}};
  const std::vector<DerWidths> wf = discretization_widths(flat, 0.4);
  CHECK(wf[0].w_q == 0.0);
  CHECK(wf[1].w_q == 0.0);
  CHECK(wf[0].w_p == Catch::Approx(0.2));
}

TEST_CASE("pixel sizes scale with the covered share and honor caps", "[aggregator]") {
  TightnessConfig cfg;
  cfg.epsilon = 0.2;

  PixelSizes ps = pixel_sizes(cfg, 1.0, 0.5, 2.0, 2.0);
  CHECK(ps.eps_p == Catch::Approx(0.1));
  CHECK(ps.eps_q == Catch::Approx(0.05));

  cfg.grid_mode = GridMode::FixedFinal;
  ps = pixel_sizes(cfg, 1.0, 0.5, 2.0, 2.0);
  CHECK(ps.eps_p == Catch::Approx(0.2));
  CHECK(ps.eps_q == Catch::Approx(0.2));

  cfg.grid_mode = GridMode::PerStep;
  cfg.cap_p = 5;
  ps = pixel_sizes(cfg, 10.0, 0.5, 20.0, 2.0);
  CHECK(ps.eps_p == Catch::Approx(2.0));  // 10 units across at most 5 bins
  CHECK(ps.eps_q == Catch::Approx(0.05));

  ps = pixel_sizes(cfg, 0.0, 0.0, 20.0, 0.0);
  CHECK(ps.eps_p == 1.0);
  CHECK(ps.eps_q == 1.0);
  CHECK_THROWS_AS(pixel_sizes(cfg, -1.0, 0.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("a single domain aggregates to its own discretization", "[aggregator]") {
  const FlexDomain d = domain_of(Battery{1.0, 1.1});
  TightnessConfig cfg;
  cfg.epsilon = 0.25;
  const AggregateResult res = aggregate_domains({d}, cfg);
  CHECK(res.steps.empty());
  CHECK_FALSE(res.grid.has_value());

  const RectUnion direct = discretize(d, 0.25, 0.25);
  REQUIRE(res.blocks.size() == direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    CHECK(res.blocks.blocks[i].p.lo == direct.blocks[i].p.lo);
    CHECK(res.blocks.blocks[i].q.hi == direct.blocks[i].q.hi);
  }
}

TEST_CASE("two switching loads stay on the exact route", "[aggregator]") {
  const SwitchingLoad a{4.0, 0.25}, b{2.5, 0.4};
  TightnessConfig cfg;  // default eps 0.1
  const AggregateResult res = aggregate_domains({domain_of(a), domain_of(b)}, cfg);

  REQUIRE(res.steps.size() == 1);
  CHECK(res.steps[0].exact);
  CHECK(res.steps[0].acc_blocks == 2);
  CHECK(res.steps[0].next_tiles == 2);
  CHECK(res.steps[0].occupied == 4);
  CHECK_FALSE(res.grid.has_value());

  REQUIRE(res.blocks.size() == 4);
  const PointCloud truth = brute_force_msum(
      {sample_domain(domain_of(a), 0.01), sample_domain(domain_of(b), 0.01)});
  REQUIRE(truth.points.size() == 4);
  for (const Point& x : truth.points) CHECK(res.blocks.contains(x, 0.0));
  for (const Rect& blk : res.blocks.blocks) {
    CHECK(blk.p.length() == 0.0);
    CHECK(blk.q.length() == 0.0);
    CHECK(cloud_has(truth, {blk.p.lo, blk.q.lo}, 0.0));
  }
}

TEST_CASE("grid folds cover the brute-force sum in both grid modes", "[aggregator]") {
  const FlexDomain bat = domain_of(Battery{0.4, 0.44});
  const FlexDomain wind = domain_of(WindInverter{0.4, 0.52, 0.5, 1.0, 0.02, 0.02});
  const std::vector<FlexDomain> domains = {bat, wind};

  const double eps = 0.2;
  const PointCloud truth =
      brute_force_msum({sample_domain(bat, eps / 10.0), sample_domain(wind, eps / 10.0)});

  for (const GridMode mode : {GridMode::PerStep, GridMode::FixedFinal}) {
    TightnessConfig cfg;
    cfg.epsilon = eps;
    cfg.grid_mode = mode;
    const AggregateResult res = aggregate_domains(domains, cfg);
    REQUIRE(res.steps.size() == 1);
    CHECK_FALSE(res.steps[0].exact);
    REQUIRE(res.grid.has_value());
    CHECK(res.grid->occupied() == res.steps[0].occupied);
    const SupersetReport rep = check_superset(res, truth);
    INFO("mode " << (mode == GridMode::PerStep ? "per-step" : "fixed-final") << " max gap "
                 << rep.max_gap);
    CHECK(rep.violations.empty());
  }
}

TEST_CASE("mixed exact and grid folds keep the superset property", "[aggregator]") {
  const std::vector<FlexDomain> domains = {domain_of(SwitchingLoad{0.3, 0.2}),
                                           domain_of(SwitchingLoad{0.4, 0.15}),
                                           domain_of(Battery{0.5, 0.55})};
  const double eps = 0.2;
  std::vector<PointCloud> clouds;
  for (const FlexDomain& d : domains) clouds.push_back(sample_domain(d, eps / 10.0));
  const PointCloud truth = brute_force_msum(clouds);

  for (const GridMode mode : {GridMode::PerStep, GridMode::FixedFinal}) {
    TightnessConfig cfg;
    cfg.epsilon = eps;
    cfg.grid_mode = mode;
    cfg.keep_step_blocks = true;
    const AggregateResult res = aggregate_domains(domains, cfg);

    REQUIRE(res.steps.size() == 2);
    CHECK(res.steps[0].exact);       // 2 x 2 points fit the budget
    CHECK_FALSE(res.steps[1].exact); // battery tiles blow it
    CHECK(check_superset(res, truth).violations.empty());

    // Every model here can sit at the origin, so every partial sum must too.
    REQUIRE(res.step_blocks.size() == 2);
    for (const RectUnion& snapshot : res.step_blocks)
      CHECK(snapshot.contains({0.0, 0.0}, 1e-9));
  }
}

TEST_CASE("fixed-final results stay within the stated distance of truth", "[aggregator]") {
  const FlexDomain bat = domain_of(Battery{0.4, 0.44});
  const std::vector<FlexDomain> domains = {bat, bat};
  const double eps = 0.2;
  const PointCloud truth =
      brute_force_msum({sample_domain(bat, eps / 10.0), sample_domain(bat, eps / 10.0)});

  TightnessConfig cfg;
  cfg.epsilon = eps;
  cfg.grid_mode = GridMode::FixedFinal;
  const AggregateResult res = aggregate_domains(domains, cfg);
  REQUIRE(res.grid.has_value());

  CHECK(check_superset(res, truth).violations.empty());
  const TightnessReport rep = check_tightness(res, truth, 2.0 * eps);
  INFO("worst corner distance " << rep.worst);
  CHECK(rep.pass);
}

TEST_CASE("per-step windows use the global budget dims when uncapped", "[aggregator]") {
  const FlexDomain bat = domain_of(Battery{0.4, 0.44});
  TightnessConfig cfg;
  cfg.epsilon = 0.2;
  const AggregateResult res = aggregate_domains({bat, bat}, cfg);

  const Bounds b = bounds_of(bat);
  const BinCounts m = bin_counts(2.0 * b.p.length(), 2.0 * b.q.length(), cfg.epsilon);
  REQUIRE(res.steps.size() == 1);
  CHECK(res.steps[0].dim_p == m.m_p);
  CHECK(res.steps[0].dim_q == m.m_q);
  CHECK(res.steps[0].occupied > 0);
  CHECK(res.steps[0].occupied <= m.m_p * m.m_q);
  CHECK(res.steps[0].eps_p == Catch::Approx(cfg.epsilon));  // full share on the last fold
  REQUIRE(res.grid.has_value());
  CHECK(res.grid->dim_p() == m.m_p);
}

TEST_CASE("axis caps bound the window dims in both grid modes", "[aggregator]") {
  const FlexDomain bat = domain_of(Battery{0.4, 0.44});
  const FlexDomain wind = domain_of(WindInverter{0.4, 0.52, 0.5, 1.0, 0.02, 0.02});
  const std::vector<FlexDomain> domains = {bat, wind, bat};

  std::vector<PointCloud> clouds;
  for (const FlexDomain& d : domains) clouds.push_back(sample_domain(d, 0.08));
  const PointCloud truth = brute_force_msum(clouds);

  for (const GridMode mode : {GridMode::PerStep, GridMode::FixedFinal}) {
    TightnessConfig cfg;
    cfg.epsilon = 0.2;
    cfg.grid_mode = mode;
    cfg.cap_p = 7;
    cfg.cap_q = 9;
    const AggregateResult res = aggregate_domains(domains, cfg);
    for (const StepStats& st : res.steps) {
      if (st.exact) continue;
      CHECK(st.dim_p <= 7);
      CHECK(st.dim_q <= 9);
    }
    REQUIRE(res.grid.has_value());
    CHECK(res.grid->dim_p() <= 7);
    CHECK(res.grid->dim_q() <= 9);
    CHECK(check_superset(res, truth).violations.empty());
  }
}

TEST_CASE("fixed-final folds share one lattice pitch and anchor", "[aggregator]") {
  const FlexDomain bat = domain_of(Battery{0.4, 0.44});
  const std::vector<FlexDomain> domains = {bat, bat, bat};
  TightnessConfig cfg;
  cfg.epsilon = 0.2;
  cfg.grid_mode = GridMode::FixedFinal;
  const AggregateResult res = aggregate_domains(domains, cfg);

  const double lattice = cfg.epsilon / 6.0;
  REQUIRE(res.steps.size() == 2);
  for (const StepStats& st : res.steps) {
    REQUIRE_FALSE(st.exact);
    CHECK(st.eps_p == Catch::Approx(lattice));
    CHECK(st.eps_q == Catch::Approx(lattice));
  }
  CHECK(res.steps[1].dim_p > res.steps[0].dim_p);  // window grows with content
  REQUIRE(res.grid.has_value());
  CHECK(res.grid->origin_p() ==
        Catch::Approx(3.0 * bounds_of(bat).p.lo - 0.5 * cfg.epsilon));
  CHECK(res.grid->eps_p() == Catch::Approx(lattice));
}

TEST_CASE("folded unit squares reproduce the closed-form pixel count", "[aggregator]") {
  const std::vector<FlexDomain> domains(3, unit_square());
  TightnessConfig cfg;
  cfg.epsilon = 0.25;

  const AggregateResult per_step = aggregate_domains(domains, cfg);
  REQUIRE(per_step.grid.has_value());
  CHECK(per_step.grid->occupied() == 144);  // (4n)^2 quarter-eps pixels over [0,3]^2
  const Rect ext = per_step.blocks.bounding_box();
  CHECK(ext.p.lo == Catch::Approx(0.0));
  CHECK(ext.p.hi == Catch::Approx(3.0));

  cfg.grid_mode = GridMode::FixedFinal;
  const AggregateResult fixed = aggregate_domains(domains, cfg);
  REQUIRE(fixed.grid.has_value());
  // [0,3]^2 spans 72 eps/6 pixels per axis; each of the two folds extends the
  // lattice-aligned lower edge one pixel down.
  CHECK(fixed.grid->occupied() == 74 * 74);
}

TEST_CASE("ensemble specs aggregate like their domain list", "[aggregator]") {
  EnsembleSpec spec;
  spec.ders = {Battery{0.4, 0.44}, SwitchingLoad{0.3, 0.2}};
  TightnessConfig cfg;
  cfg.epsilon = 0.2;
  const AggregateResult via_spec = aggregate(spec, cfg);
  const AggregateResult direct = aggregate_domains(
      {domain_of(Battery{0.4, 0.44}), domain_of(SwitchingLoad{0.3, 0.2})}, cfg);
  REQUIRE(via_spec.blocks.size() == direct.blocks.size());
  for (std::size_t i = 0; i < direct.blocks.size(); ++i) {
    CHECK(via_spec.blocks.blocks[i].p.lo == direct.blocks.blocks[i].p.lo);
    CHECK(via_spec.blocks.blocks[i].q.lo == direct.blocks.blocks[i].q.lo);
  }
}

TEST_CASE("aggregation rejects bad configs", "[aggregator]") {
  const std::vector<FlexDomain> one = {domain_of(Battery{1.0, 1.1})};
  TightnessConfig cfg;
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(aggregate_domains(one, cfg), std::invalid_argument);
  cfg.epsilon = 0.1;
  cfg.cap_p = 0;
  CHECK_THROWS_AS(aggregate_domains(one, cfg), std::invalid_argument);
  cfg.cap_p.reset();
  CHECK_THROWS_AS(aggregate_domains({}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(aggregate(EnsembleSpec{}, cfg), std::invalid_argument);
}
