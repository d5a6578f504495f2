#pragma once

// JSON forms of instances and generator configs, and a stable config digest.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sepopt/agents.hpp"
#include "sepopt/ev.hpp"
#include "sepopt/problem.hpp"

namespace sepopt {

using Json = nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& path, const std::string& what) : std::invalid_argument(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class UnknownAgentKind : public std::invalid_argument {
 public:
  explicit UnknownAgentKind(const std::string& kind)
      : std::invalid_argument("unknown agent kind '" + kind + "'"), kind_(kind) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Digest of the canonical dump; object keys are sorted, so key order in the
/// source document does not matter.
inline std::string config_digest(const Json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

namespace detail {

template <class T>
T get_field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(path + "." + key, "missing");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(path + "." + key, e.what());
  }
}

template <class T>
T get_or(const Json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  return get_field<T>(j, key, path);
}

inline DenseMatrix matrix_from_json(const Json& j, const std::string& path) {
  auto rows = get_field<std::vector<Vec>>(j, "A", path);
  try {
    return DenseMatrix::from_rows(rows);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ".A", e.what());
  }
}

inline Json range_to_json(const ev::Range& r) { return Json::array({r.lo, r.hi}); }

inline ev::Range range_from_json(const Json& j, const std::string& key, const std::string& path, ev::Range fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (v.is_number()) return {v.get<double>(), v.get<double>()};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError(path + "." + key, "expected a number or [lo, hi]");
}

}  // namespace detail

inline Json agent_to_json(const AgentOracle& agent) {
  if (const auto* e = dynamic_cast<const ev::EvAgent*>(&agent)) {
    const auto& p = e->params();
    return Json{{"kind", "ev"},     {"P", p.P},         {"delta", p.delta},       {"xi", p.xi},
                {"E_init", p.E_init}, {"E_ref", p.E_ref}, {"E_max", p.E_max}, {"tariff", e->tariff()}};
  }
  if (const auto* b = dynamic_cast<const BoxLinearAgent*>(&agent)) {
    return Json{{"kind", "box"},
                {"lower", b->lower()},
                {"upper", b->upper()},
                {"cost", b->cost_vector()},
                {"A", b->coupling_matrix().to_rows()}};
  }
  if (const auto* f = dynamic_cast<const FiniteSetAgent*>(&agent)) {
    return Json{{"kind", "finite"},
                {"points", f->points()},
                {"costs", f->costs()},
                {"A", f->coupling_matrix().to_rows()}};
  }
  throw UnknownAgentKind(agent.kind());
}

inline Json instance_to_json(const Instance& inst) {
  Json agents = Json::array();
  for (std::size_t i = 0; i < inst.num_agents(); ++i) agents.push_back(agent_to_json(inst.agent(i)));
  return Json{{"m", inst.num_rows()}, {"b", inst.b()}, {"agents", std::move(agents)}};
}

inline Instance instance_from_json(const Json& j, const std::string& path = "instance") {
  const auto m = detail::get_field<std::size_t>(j, "m", path);
  const auto b = detail::get_field<Vec>(j, "b", path);
  if (b.size() != m) throw ConfigError(path + ".b", "length must equal m");
  if (!j.contains("agents") || !j.at("agents").is_array()) throw ConfigError(path + ".agents", "expected an array");
  std::vector<AgentPtr> agents;
  std::shared_ptr<const Vec> last_tariff;
  const Json& arr = j.at("agents");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string ap = path + ".agents[" + std::to_string(i) + "]";
    const Json& a = arr[i];
    const auto kind = detail::get_field<std::string>(a, "kind", ap);
    try {
      if (kind == "ev") {
        ev::EvAgentParams p;
        p.P = detail::get_field<double>(a, "P", ap);
        p.delta = detail::get_field<double>(a, "delta", ap);
        p.xi = detail::get_field<double>(a, "xi", ap);
        p.E_init = detail::get_field<double>(a, "E_init", ap);
        p.E_ref = detail::get_field<double>(a, "E_ref", ap);
        p.E_max = detail::get_field<double>(a, "E_max", ap);
        auto tariff = detail::get_field<Vec>(a, "tariff", ap);
        // Agents generated together share one tariff; keep sharing on reload.
        if (!last_tariff || *last_tariff != tariff) last_tariff = std::make_shared<const Vec>(std::move(tariff));
        agents.push_back(std::make_shared<ev::EvAgent>(p, last_tariff));
      } else if (kind == "box") {
        agents.push_back(std::make_shared<BoxLinearAgent>(detail::get_field<Vec>(a, "lower", ap),
                                                          detail::get_field<Vec>(a, "upper", ap),
                                                          detail::get_field<Vec>(a, "cost", ap),
                                                          detail::matrix_from_json(a, ap)));
      } else if (kind == "finite") {
        agents.push_back(std::make_shared<FiniteSetAgent>(detail::get_field<std::vector<Vec>>(a, "points", ap),
                                                          detail::get_field<Vec>(a, "costs", ap),
                                                          detail::matrix_from_json(a, ap)));
      } else {
        throw UnknownAgentKind(kind);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const UnknownAgentKind&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(ap, e.what());
    }
  }
  return Instance(std::move(agents), b);
}

inline Json ev_config_to_json(const ev::EvInstanceConfig& c) {
  Json j{{"N", c.N},
         {"m", c.m},
         {"seed", c.seed},
         {"P_max_fraction", c.P_max_fraction},
         {"tariff_base", c.tariff_base},
         {"tariff_amplitude", c.tariff_amplitude},
         {"tariff_noise", c.tariff_noise},
         {"P", detail::range_to_json(c.P)},
         {"xi", detail::range_to_json(c.xi)},
         {"delta", c.delta},
         {"E_max", detail::range_to_json(c.E_max)},
         {"E_init_fraction", detail::range_to_json(c.E_init_fraction)},
         {"E_ref_fraction", detail::range_to_json(c.E_ref_fraction)},
         {"max_attempts", c.max_attempts}};
  if (c.P_max) j["P_max"] = *c.P_max;
  if (c.tariff) j["tariff"] = *c.tariff;
  return j;
}

inline ev::EvInstanceConfig ev_config_from_json(const Json& j, const std::string& path = "ev") {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  ev::EvInstanceConfig c;
  c.N = detail::get_or<std::size_t>(j, "N", path, c.N);
  c.m = detail::get_or<std::size_t>(j, "m", path, c.m);
  c.seed = detail::get_or<std::uint64_t>(j, "seed", path, c.seed);
  if (j.contains("P_max")) c.P_max = detail::get_field<double>(j, "P_max", path);
  c.P_max_fraction = detail::get_or<double>(j, "P_max_fraction", path, c.P_max_fraction);
  if (j.contains("tariff")) c.tariff = detail::get_field<Vec>(j, "tariff", path);
  c.tariff_base = detail::get_or<double>(j, "tariff_base", path, c.tariff_base);
  c.tariff_amplitude = detail::get_or<double>(j, "tariff_amplitude", path, c.tariff_amplitude);
  c.tariff_noise = detail::get_or<double>(j, "tariff_noise", path, c.tariff_noise);
  c.P = detail::range_from_json(j, "P", path, c.P);
  c.xi = detail::range_from_json(j, "xi", path, c.xi);
  c.delta = detail::get_or<double>(j, "delta", path, c.delta);
  c.E_max = detail::range_from_json(j, "E_max", path, c.E_max);
  c.E_init_fraction = detail::range_from_json(j, "E_init_fraction", path, c.E_init_fraction);
  c.E_ref_fraction = detail::range_from_json(j, "E_ref_fraction", path, c.E_ref_fraction);
  c.max_attempts = detail::get_or<std::size_t>(j, "max_attempts", path, c.max_attempts);
  if (c.N == 0) throw ConfigError(path + ".N", "must be positive");
  if (c.m == 0) throw ConfigError(path + ".m", "must be positive");
  return c;
}

inline Json read_json_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(file + ": " + e.what());
  }
}

inline void write_text_file(const std::string& file, const std::string& text) {
  const auto parent = std::filesystem::path(file).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file);
  out << text;
}

}  // namespace sepopt
