// Command-line surface: aggregate | verify | scenario | bench.
//
// Exit codes are a stable contract:
//   0 success, 1 malformed input file, 2 bad parameters or usage,
//   3 oracle cap exceeded, 4 verification failure.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flexsum/io.hpp"
#include "flexsum/oracle.hpp"
#include "flexsum/scenario.hpp"

namespace {

using namespace flexsum;

GridMode parse_mode(const std::string& s) {
  if (s == "perstep") return GridMode::PerStep;
  if (s == "fixedfinal") return GridMode::FixedFinal;
  throw std::invalid_argument("mode must be 'perstep' or 'fixedfinal'");
}

std::optional<std::int64_t> cap_of(std::int64_t v) {
  return v > 0 ? std::optional<std::int64_t>(v) : std::nullopt;
}

std::string cap_str(std::optional<std::int64_t> c) {
  return c ? std::to_string(*c) : std::string("none");
}

struct AggregateArgs {
  std::string ensemble_file;
  double eps = 0.0;
  std::int64_t cap_p = 0;  // 0 = uncapped
  std::int64_t cap_q = 0;
  std::string mode = "perstep";
  std::string out_prefix;
};

int run_aggregate(const AggregateArgs& a) {
  const std::string text = read_text_file(a.ensemble_file);
  const EnsembleSpec spec = parse_ensemble(text);

  TightnessConfig cfg;
  cfg.epsilon = a.eps;
  cfg.cap_p = cap_of(a.cap_p);
  cfg.cap_q = cap_of(a.cap_q);
  cfg.grid_mode = parse_mode(a.mode);
  const AggregateResult result = aggregate(spec, cfg);

  write_text_file(a.out_prefix + ".pixels.csv", write_pixels_csv(result));
  write_text_file(a.out_prefix + ".blocks.csv", write_blocks_csv(result.blocks));
  write_text_file(a.out_prefix + ".stats.json", write_stats_json(result));

  const std::string config = "aggregate|ensemble:" + hex64(fnv1a64(text)) +
                             "|eps:" + format_double(a.eps) + "|cap_p:" + cap_str(cfg.cap_p) +
                             "|cap_q:" + cap_str(cfg.cap_q) + "|mode:" + a.mode;
  write_text_file(a.out_prefix + ".manifest.json",
                  write_manifest("aggregate", config, spec.seed, iso8601_utc_now()));

  const std::int64_t occupied =
      result.grid ? result.grid->occupied() : static_cast<std::int64_t>(result.blocks.size());
  std::cout << "aggregated " << spec.ders.size() << " domains in " << result.steps.size()
            << " folds: " << (result.grid ? "grid" : "exact") << ", " << occupied
            << (result.grid ? " occupied pixels, " : " blocks, ") << result.blocks.size()
            << " result blocks\n"
            << "wrote " << a.out_prefix << ".{pixels.csv,blocks.csv,stats.json,manifest.json}\n";
  return 0;
}

struct VerifyArgs {
  std::string ensemble_file;
  double eps = 0.0;
  double delta = 0.0;
  double bound = 0.0;
  std::int64_t cap_p = 0;
  std::int64_t cap_q = 0;
  std::string mode = "perstep";
  double deflate = 0.0;
  std::string out = "verify.report.json";
};

// Negative-control knob: contracting every result block by a margin must
// break the superset property, proving the checker can see a deflated set.
void deflate_result(AggregateResult& r, double margin) {
  RectUnion shrunk;
  for (const Rect& b : r.blocks.blocks) {
    const Rect s{{b.p.lo + margin, b.p.hi - margin}, {b.q.lo + margin, b.q.hi - margin}};
    if (s.p.lo <= s.p.hi && s.q.lo <= s.q.hi) shrunk.blocks.push_back(s);
  }
  r.blocks = std::move(shrunk);
  r.grid.reset();
}

int run_verify(const VerifyArgs& a) {
  const std::string text = read_text_file(a.ensemble_file);
  const EnsembleSpec spec = parse_ensemble(text);

  TightnessConfig cfg;
  cfg.epsilon = a.eps;
  cfg.cap_p = cap_of(a.cap_p);
  cfg.cap_q = cap_of(a.cap_q);
  cfg.grid_mode = parse_mode(a.mode);
  AggregateResult result = aggregate(spec, cfg);
  if (a.deflate > 0.0) deflate_result(result, a.deflate);

  std::vector<PointCloud> clouds;
  clouds.reserve(spec.ders.size());
  for (const DerSpec& d : spec.ders) clouds.push_back(sample_domain(domain_of(d), a.delta));
  const PointCloud truth = brute_force_msum(clouds);

  const SupersetReport sup = check_superset(result, truth);
  const TightnessReport tig = check_tightness(result, truth, a.bound);
  const bool pass = sup.violations.empty() && tig.pass;

  nlohmann::ordered_json j;
  j["mode"] = a.mode;
  j["eps"] = a.eps;
  j["delta"] = a.delta;
  j["bound"] = a.bound;
  j["truth_points"] = truth.points.size();
  j["violations"] = sup.violations.size();
  j["max_gap"] = sup.max_gap;
  j["worst"] = tig.worst;
  j["pass"] = pass;
  write_text_file(a.out, j.dump(2) + "\n");

  const std::string config = "verify|ensemble:" + hex64(fnv1a64(text)) +
                             "|eps:" + format_double(a.eps) + "|delta:" + format_double(a.delta) +
                             "|bound:" + format_double(a.bound) + "|cap_p:" + cap_str(cfg.cap_p) +
                             "|cap_q:" + cap_str(cfg.cap_q) + "|mode:" + a.mode +
                             "|deflate:" + format_double(a.deflate);
  write_text_file(a.out + ".manifest.json",
                  write_manifest("verify", config, spec.seed, iso8601_utc_now()));

  std::cout << "superset: " << sup.violations.size() << " violations (max gap "
            << format_double(sup.max_gap) << " over " << truth.points.size()
            << " truth points)\n"
            << "tightness: worst " << format_double(tig.worst) << " against bound "
            << format_double(a.bound) << " (+ sampling slack " << format_double(truth.delta)
            << ")\n"
            << (pass ? "PASS" : "FAIL") << ", report in " << a.out << "\n";
  return pass ? 0 : 4;
}

struct ScenarioArgs {
  std::string source;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out = "ensemble.json";
};

MixRow parse_mix_file(const std::string& path) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("mix spec JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("mix spec JSON: expected a top-level object");
  const auto field = [&j, &path](const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number())
      throw SchemaError(path + ": missing numeric field '" + key + "'");
    return it->get<double>();
  };
  return MixRow{field("hvac"), field("solar"), field("wind"), field("ewh"), field("bev")};
}

int run_scenario(const ScenarioArgs& a) {
  const bool digits = !a.source.empty() &&
                      std::all_of(a.source.begin(), a.source.end(),
                                  [](unsigned char c) { return std::isdigit(c); });
  EnsembleSpec spec;
  std::string source_tag;
  if (digits) {
    const int id = std::stoi(a.source);
    if (id < 1 || id > 8)
      throw std::invalid_argument("scenario: unknown id '" + a.source + "' (builtin ids are 1..8)");
    spec = generate_ensemble(kMixTable[static_cast<std::size_t>(id - 1)], a.n, a.seed);
    source_tag = "id:" + std::to_string(id);
  } else {
    if (!std::filesystem::exists(a.source))
      throw std::invalid_argument("scenario: '" + a.source +
                                  "' is neither a builtin id nor a mix spec file");
    spec = generate_ensemble(parse_mix_file(a.source), a.n, a.seed);
    source_tag = "mix:" + hex64(fnv1a64(read_text_file(a.source)));
  }

  write_text_file(a.out, write_ensemble(spec));
  const std::string config = "scenario|source:" + source_tag + "|n:" + std::to_string(a.n) +
                             "|seed:" + std::to_string(a.seed);
  write_text_file(a.out + ".manifest.json",
                  write_manifest("scenario", config, a.seed, iso8601_utc_now()));

  std::cout << "wrote " << a.out << " (" << spec.ders.size() << " ders)\n";
  return 0;
}

struct BenchArgs {
  std::string config_file;
  std::int64_t caps = 0;
  bool caps_given = false;
  double scale = 1.0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool parallel = false;
  bool synthetic_selftest = false;
  std::string out_prefix = "bench";
};

std::vector<ScalingFit> fit_groups(const std::vector<BenchRecord>& records) {
  std::vector<ScalingFit> fits;
  const auto try_fit = [&fits](const std::vector<BenchRecord>& group, SweepAxis axis) {
    if (group.size() < 4) return;
    try {
      fits.push_back(fit_scaling(group, axis));
    } catch (const std::invalid_argument&) {
      // Group does not span enough of the axis for a meaningful law.
    }
  };

  std::vector<double> eps_seen;
  std::vector<std::size_t> n_seen;
  for (const BenchRecord& r : records) {
    if (std::find(eps_seen.begin(), eps_seen.end(), r.eps) == eps_seen.end())
      eps_seen.push_back(r.eps);
    if (std::find(n_seen.begin(), n_seen.end(), r.n) == n_seen.end()) n_seen.push_back(r.n);
  }
  for (const double e : eps_seen) {
    std::vector<BenchRecord> group;
    for (const BenchRecord& r : records)
      if (r.eps == e) group.push_back(r);
    try_fit(group, SweepAxis::N);
  }
  for (const std::size_t n : n_seen) {
    std::vector<BenchRecord> group;
    for (const BenchRecord& r : records)
      if (r.n == n) group.push_back(r);
    try_fit(group, SweepAxis::InvEps);
  }
  return fits;
}

int run_bench(const BenchArgs& a) {
  if (a.synthetic_selftest) {
    const double slope = synthetic_selftest_slope();
    write_text_file(a.out_prefix + ".fits.json",
                    write_fits_json({ScalingFit{SweepAxis::N, slope, 1.0}}));
    write_text_file(a.out_prefix + ".manifest.json",
                    write_manifest("bench", "bench|synthetic-selftest", 0, iso8601_utc_now()));
    std::cout << "synthetic selftest slope " << format_double(slope) << ", wrote "
              << a.out_prefix << ".fits.json\n";
    return 0;
  }

  if (a.config_file.empty())
    throw std::invalid_argument("bench: a config file is required (or --synthetic-selftest)");
  const std::string config_text = read_text_file(a.config_file);

  // The whole config is parameter input, so every defect in it is a
  // parameter error, not a schema error.
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(config_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bench config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("bench config: expected a top-level object");

  const auto int_field = [&j](const char* key, std::int64_t fallback) {
    const auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number_integer())
      throw std::invalid_argument(std::string("bench config: '") + key + "' must be an integer");
    return it->get<std::int64_t>();
  };

  const auto axis_it = j.find("n");
  if (axis_it == j.end() || !axis_it->is_array() || axis_it->empty())
    throw std::invalid_argument("bench config: missing non-empty array 'n'");
  std::vector<std::size_t> n_values;
  for (const auto& v : *axis_it) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1)
      throw std::invalid_argument("bench config: 'n' entries must be positive integers");
    n_values.push_back(v.get<std::size_t>());
  }
  const auto eps_it = j.find("eps");
  if (eps_it == j.end() || !eps_it->is_array() || eps_it->empty())
    throw std::invalid_argument("bench config: missing non-empty array 'eps'");
  std::vector<double> eps_values;
  for (const auto& v : *eps_it) {
    if (!v.is_number()) throw std::invalid_argument("bench config: 'eps' entries must be numbers");
    eps_values.push_back(v.get<double>());
  }

  std::uint64_t seed = 0;
  if (a.seed_given) {
    seed = a.seed;
  } else if (const auto it = j.find("seed"); it != j.end() && it->is_number_unsigned()) {
    seed = it->get<std::uint64_t>();
  } else {
    throw std::invalid_argument("bench: seed required (config 'seed' or --seed)");
  }

  std::int64_t cap_p = int_field("cap_p", 0);
  std::int64_t cap_q = int_field("cap_q", 0);
  if (a.caps_given) cap_p = cap_q = a.caps;
  if (cap_p < 0 || cap_q < 0) throw std::invalid_argument("bench config: caps must be >= 0");
  if (!(a.scale > 0.0)) throw std::invalid_argument("bench: --scale must be > 0");
  const auto scaled = [&a](std::int64_t c) {
    return c > 0 ? std::max<std::int64_t>(
                       1, std::llround(static_cast<double>(c) * a.scale))
                 : c;
  };
  cap_p = scaled(cap_p);
  cap_q = scaled(cap_q);

  const int repeats = static_cast<int>(int_field("repeats", 3));
  std::string mode_str = "perstep";
  if (const auto it = j.find("mode"); it != j.end()) {
    if (!it->is_string()) throw std::invalid_argument("bench config: 'mode' must be a string");
    mode_str = it->get<std::string>();
  }
  const GridMode mode = parse_mode(mode_str);

  EnsembleSpec base;
  if (const auto it = j.find("base"); it != j.end()) {
    try {
      base = parse_ensemble(it->dump());
    } catch (const SchemaError& e) {
      throw std::invalid_argument(std::string("bench config: ") + e.what());
    }
  } else {
    base = base_mix_ensemble(1, seed);
  }

  const std::vector<BenchRecord> records =
      sweep(base, n_values, eps_values, cap_of(cap_p), cap_of(cap_q), repeats, seed, mode,
            a.parallel);
  const std::vector<ScalingFit> fits = fit_groups(records);

  write_text_file(a.out_prefix + ".records.csv", write_bench_csv(records));
  write_text_file(a.out_prefix + ".fits.json", write_fits_json(fits));
  const std::string config = "bench|config:" + hex64(fnv1a64(config_text)) +
                             "|caps:" + (a.caps_given ? std::to_string(a.caps) : "config") +
                             "|scale:" + format_double(a.scale) +
                             "|parallel:" + (a.parallel ? "1" : "0") +
                             "|seed:" + std::to_string(seed);
  write_text_file(a.out_prefix + ".manifest.json",
                  write_manifest("bench", config, seed, iso8601_utc_now()));

  std::cout << records.size() << " records, " << fits.size() << " scaling fits\n";
  for (const ScalingFit& f : fits)
    std::cout << "fit axis=" << (f.axis == SweepAxis::N ? "n" : "inv_eps")
              << " slope=" << format_double(f.slope) << " r2=" << format_double(f.r2) << "\n";
  std::cout << "wrote " << a.out_prefix << ".{records.csv,fits.json,manifest.json}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guaranteed-superset aggregation of DER flexibility domains"};
  app.require_subcommand(1);

  AggregateArgs aa;
  CLI::App* agg = app.add_subcommand(
      "aggregate", "Fold an ensemble into a conservative Minkowski-sum enclosure");
  agg->add_option("ensemble", aa.ensemble_file, "Ensemble JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  agg->add_option("--eps", aa.eps, "Tightness parameter")->required();
  agg->add_option("--cap-p", aa.cap_p, "Max grid columns, 0 = uncapped")
      ->check(CLI::NonNegativeNumber);
  agg->add_option("--cap-q", aa.cap_q, "Max grid rows, 0 = uncapped")
      ->check(CLI::NonNegativeNumber);
  agg->add_option("--mode", aa.mode, "Grid mode: perstep or fixedfinal")
      ->check(CLI::IsMember({"perstep", "fixedfinal"}));
  agg->add_option("--out", aa.out_prefix, "Output path prefix")->required();

  VerifyArgs va;
  CLI::App* ver = app.add_subcommand(
      "verify", "Aggregate, then check the result against a brute-force oracle");
  ver->add_option("ensemble", va.ensemble_file, "Ensemble JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  ver->add_option("--eps", va.eps, "Tightness parameter")->required();
  ver->add_option("--delta", va.delta, "Oracle sampling pitch")->required();
  ver->add_option("--bound", va.bound, "Tightness bound to enforce")->required();
  ver->add_option("--cap-p", va.cap_p, "Max grid columns, 0 = uncapped")
      ->check(CLI::NonNegativeNumber);
  ver->add_option("--cap-q", va.cap_q, "Max grid rows, 0 = uncapped")
      ->check(CLI::NonNegativeNumber);
  ver->add_option("--mode", va.mode, "Grid mode: perstep or fixedfinal")
      ->check(CLI::IsMember({"perstep", "fixedfinal"}));
  ver->add_option("--deflate", va.deflate,
                  "Shrink result blocks by this margin first (negative control)")
      ->check(CLI::NonNegativeNumber);
  ver->add_option("--out", va.out, "Report file path");

  ScenarioArgs sa;
  CLI::App* sce =
      app.add_subcommand("scenario", "Draw a seeded ensemble from a device-mix profile");
  sce->add_option("source", sa.source, "Builtin mix id 1..8 or a mix spec JSON file")
      ->required();
  sce->add_option("--n", sa.n, "Number of devices")->required()->check(CLI::PositiveNumber);
  sce->add_option("--seed", sa.seed, "RNG seed (required for reproducibility)")->required();
  sce->add_option("--out", sa.out, "Output ensemble file");

  BenchArgs ba;
  CLI::App* ben =
      app.add_subcommand("bench", "Run timing sweeps and fit runtime scaling laws");
  ben->add_option("config", ba.config_file, "Sweep config JSON file")->check(CLI::ExistingFile);
  CLI::Option* caps_opt =
      ben->add_option("--caps", ba.caps, "Set both grid caps, 0 = uncapped")
          ->check(CLI::NonNegativeNumber);
  ben->add_option("--scale", ba.scale, "Scale factor applied to caps");
  CLI::Option* seed_opt = ben->add_option("--seed", ba.seed, "Override config seed");
  ben->add_flag("--parallel", ba.parallel, "Time sweep cells concurrently");
  ben->add_flag("--synthetic-selftest", ba.synthetic_selftest,
                "Fit known quadratic data instead of running the engine");
  ben->add_option("--out", ba.out_prefix, "Output path prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }
  ba.caps_given = caps_opt->count() > 0;
  ba.seed_given = seed_opt->count() > 0;

  try {
    if (agg->parsed()) return run_aggregate(aa);
    if (ver->parsed()) return run_verify(va);
    if (sce->parsed()) return run_scenario(sa);
    return run_bench(ba);
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 1;
  } catch (const CapExceeded& e) {
    std::cerr << "oracle cap exceeded: about " << format_double(e.product)
              << " candidate sum points; raise delta or shrink the ensemble\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const std::length_error& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
