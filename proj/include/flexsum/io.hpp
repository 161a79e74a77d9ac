#pragma once

// File formats: ensemble JSON, pixel/block CSV, per-step stats, bench
// records, run manifests. Everything here is byte-deterministic for fixed
// inputs; only the manifest carries a timestamp, injected by the caller.

#include <charconv>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flexsum/bench.hpp"

namespace flexsum {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Malformed input files: missing or mistyped fields, unknown device types,
// unparseable JSON. Distinct from parameter validation, which rejects
// well-formed but physically meaningless values.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::logic_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

namespace detail {

inline double require_number(const nlohmann::ordered_json& obj, const char* key,
                             std::size_t index) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number())
    throw SchemaError("ders[" + std::to_string(index) + "]: missing numeric field '" + key +
                      "'");
  return it->get<double>();
}

}  // namespace detail

inline nlohmann::ordered_json der_to_json(const DerSpec& d) {
  nlohmann::ordered_json j;
  j["type"] = std::string(der_type_name(d));
  std::visit(
      [&j](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Battery> || std::is_same_v<T, PvInverter>) {
          j["p_max"] = m.p_max;
          j["s"] = m.s;
        } else if constexpr (std::is_same_v<T, WindInverter>) {
          j["p_max"] = m.p_max;
          j["s1"] = m.s1;
          j["s2"] = m.s2;
          j["alpha"] = m.alpha;
          j["p0"] = m.p0;
          j["q0"] = m.q0;
        } else {
          j["p_on"] = m.p_on;
          j["gamma"] = m.gamma;
        }
      },
      d);
  return j;
}

inline DerSpec der_from_json(const nlohmann::ordered_json& j, std::size_t index) {
  if (!j.is_object())
    throw SchemaError("ders[" + std::to_string(index) + "]: expected an object");
  const auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string())
    throw SchemaError("ders[" + std::to_string(index) + "]: missing string field 'type'");
  const std::string type = type_it->get<std::string>();
  if (type == "battery")
    return Battery{detail::require_number(j, "p_max", index),
                   detail::require_number(j, "s", index)};
  if (type == "pv")
    return PvInverter{detail::require_number(j, "p_max", index),
                      detail::require_number(j, "s", index)};
  if (type == "wind")
    return WindInverter{detail::require_number(j, "p_max", index),
                        detail::require_number(j, "s1", index),
                        detail::require_number(j, "s2", index),
                        detail::require_number(j, "alpha", index),
                        detail::require_number(j, "p0", index),
                        detail::require_number(j, "q0", index)};
  if (type == "switching")
    return SwitchingLoad{detail::require_number(j, "p_on", index),
                         detail::require_number(j, "gamma", index)};
  throw SchemaError("ders[" + std::to_string(index) + "]: unknown device type '" + type + "'");
}

inline std::string write_ensemble(const EnsembleSpec& spec) {
  nlohmann::ordered_json j;
  j["seed"] = spec.seed;
  if (!spec.provenance.empty()) j["provenance"] = spec.provenance;
  j["ders"] = nlohmann::ordered_json::array();
  for (const DerSpec& d : spec.ders) j["ders"].push_back(der_to_json(d));
  return j.dump(2) + "\n";
}

inline EnsembleSpec parse_ensemble(std::string_view text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("ensemble JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("ensemble JSON: expected a top-level object");
  const auto ders_it = j.find("ders");
  if (ders_it == j.end() || !ders_it->is_array())
    throw SchemaError("ensemble JSON: missing array field 'ders'");
  if (ders_it->empty()) throw SchemaError("ensemble JSON: 'ders' is empty");

  EnsembleSpec spec;
  if (const auto seed_it = j.find("seed"); seed_it != j.end()) {
    if (!seed_it->is_number_unsigned())
      throw SchemaError("ensemble JSON: 'seed' must be a non-negative integer");
    spec.seed = seed_it->get<std::uint64_t>();
  }
  if (const auto prov_it = j.find("provenance"); prov_it != j.end()) {
    if (!prov_it->is_string()) throw SchemaError("ensemble JSON: 'provenance' must be a string");
    spec.provenance = prov_it->get<std::string>();
  }
  spec.ders.reserve(ders_it->size());
  for (std::size_t i = 0; i < ders_it->size(); ++i)
    spec.ders.push_back(der_from_json((*ders_it)[i], i));
  return spec;
}

// One row per occupied pixel with its index pair and physical extent. Exact
// results have no grid; their blocks are written as degenerate rows with
// k = l = 0.
inline std::string write_pixels_csv(const AggregateResult& result) {
  std::string out = "k,l,p_lo,p_hi,q_lo,q_hi\n";
  const auto row = [&out](std::int64_t k, std::int64_t l, const Rect& r) {
    out += std::to_string(k);
    out += ',';
    out += std::to_string(l);
    out += ',';
    out += format_double(r.p.lo);
    out += ',';
    out += format_double(r.p.hi);
    out += ',';
    out += format_double(r.q.lo);
    out += ',';
    out += format_double(r.q.hi);
    out += '\n';
  };
  if (result.grid) {
    const PixelGrid& g = *result.grid;
    for (std::int64_t k = 1; k <= g.dim_p(); ++k)
      for (std::int64_t l = 1; l <= g.dim_q(); ++l)
        if (g.test(k, l)) row(k, l, g.pixel_extent(k, l));
  } else {
    for (const Rect& r : result.blocks.blocks) row(0, 0, r);
  }
  return out;
}

inline std::string write_blocks_csv(const RectUnion& blocks) {
  std::string out = "p_lo,p_hi,q_lo,q_hi\n";
  for (const Rect& r : blocks.blocks) {
    out += format_double(r.p.lo);
    out += ',';
    out += format_double(r.p.hi);
    out += ',';
    out += format_double(r.q.lo);
    out += ',';
    out += format_double(r.q.hi);
    out += '\n';
  }
  return out;
}

inline std::string write_stats_json(const AggregateResult& result) {
  nlohmann::ordered_json j;
  j["steps"] = nlohmann::ordered_json::array();
  for (const StepStats& st : result.steps) {
    nlohmann::ordered_json s;
    s["step"] = st.step;
    s["acc_blocks"] = st.acc_blocks;
    s["next_blocks"] = st.next_blocks;
    s["next_tiles"] = st.next_tiles;
    s["exact"] = st.exact;
    s["eps_p"] = st.eps_p;
    s["eps_q"] = st.eps_q;
    s["dim_p"] = st.dim_p;
    s["dim_q"] = st.dim_q;
    s["occupied"] = st.occupied;
    s["seconds"] = st.seconds;
    j["steps"].push_back(std::move(s));
  }
  j["final_blocks"] = result.blocks.size();
  j["final_occupied"] = result.grid ? result.grid->occupied() : 0;
  return j.dump(2) + "\n";
}

inline std::string bench_csv_header() {
  return "n,eps,cap_p,cap_q,wall_time_s,peak_blocks,occupied_pixels,seed\n";
}

inline std::string bench_csv_row(const BenchRecord& r) {
  std::string out;
  out += std::to_string(r.n);
  out += ',';
  out += format_double(r.eps);
  out += ',';
  out += std::to_string(r.cap_p);
  out += ',';
  out += std::to_string(r.cap_q);
  out += ',';
  out += format_double(r.wall_time_s);
  out += ',';
  out += std::to_string(r.peak_blocks);
  out += ',';
  out += std::to_string(r.occupied_pixels);
  out += ',';
  out += std::to_string(r.seed);
  out += '\n';
  return out;
}

inline std::string write_bench_csv(const std::vector<BenchRecord>& records) {
  std::string out = bench_csv_header();
  for (const BenchRecord& r : records) out += bench_csv_row(r);
  return out;
}

inline std::string write_fits_json(const std::vector<ScalingFit>& fits) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const ScalingFit& f : fits) {
    nlohmann::ordered_json o;
    o["axis"] = f.axis == SweepAxis::N ? "n" : "inv_eps";
    o["slope"] = f.slope;
    o["r2"] = f.r2;
    j.push_back(std::move(o));
  }
  return j.dump(2) + "\n";
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// Reproducibility sidecar written next to every output set. The config
// string is the caller's canonical rendering of everything that shaped the
// run; its hash lets two output sets be compared without diffing configs.
inline std::string write_manifest(std::string_view command, std::string_view config,
                                  std::uint64_t seed, std::string_view timestamp) {
  nlohmann::ordered_json j;
  j["command"] = std::string(command);
  j["config_hash"] = "fnv1a64:" + hex64(fnv1a64(config));
  j["seed"] = seed;
  j["tool_version"] = std::string(kToolVersion);
  j["timestamp"] = std::string(timestamp);
  return j.dump(2) + "\n";
}

inline std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace flexsum
