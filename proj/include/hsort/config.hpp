#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>
#include <json.hpp>

#include "hsort/bytes.hpp"
#include "hsort/circuits.hpp"
#include "hsort/setup.hpp"
#include "hsort/simnet.hpp"
#include "hsort/stake.hpp"

namespace hsort::config {

/// Validation failure. `where` is "file:line", a flag name, or "default".
struct ConfigError : std::runtime_error {
  ConfigError(std::string where_, const std::string& message)
      : std::runtime_error(where_ + ": " + message), where(std::move(where_)) {}
  std::string where;
};

struct ScenarioConfig {
  std::optional<std::uint64_t> n;
  std::vector<std::uint64_t> stakes;
  std::optional<std::uint64_t> s_f;
  std::uint64_t d = 1;
  std::uint64_t rounds = 1;
  std::string adversary = "honest";
  std::optional<std::vector<std::uint64_t>> corrupted;
  std::uint64_t adversary_max_delay = 16;
  std::uint64_t seed = 0;
  std::uint64_t delta_bits = 64;
  std::uint64_t lambda = 256;
  std::string schedule = "fifo";
  std::uint64_t schedule_max_delay = 4;
  std::uint64_t victim = 1;
  std::uint64_t starve_ticks = 8;
  std::string attestation = "ed25519";
  std::uint64_t tick_budget = 100000;
  std::uint64_t trials = 1000;
  std::string out = "hsort-out";
  std::optional<std::vector<setup::Contribution>> contributions;

  std::string source = "<config>";
  std::map<std::string, std::string> origin;  // key -> "file:line" or "--flag"

  std::string where(const std::string& key) const {
    auto it = origin.find(key);
    return it == origin.end() ? "default (" + key + ")" : it->second;
  }

  void set_from_flag(const std::string& key, const std::string& flag) { origin[key] = flag; }
};

namespace detail {

inline std::string at(const std::string& source, const YAML::Node& node) {
  return source + ":" + std::to_string(node.Mark().line + 1);
}

inline std::uint64_t as_u64(const std::string& source, const std::string& key, const YAML::Node& node) {
  if (!node.IsScalar()) throw ConfigError(at(source, node), key + " must be a non-negative integer");
  const auto& text = node.Scalar();
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(at(source, node), key + " must be a non-negative integer, got '" + text + "'");
  try {
    return std::stoull(text);
  } catch (const std::out_of_range&) {
    throw ConfigError(at(source, node), key + " does not fit in 64 bits");
  }
}

inline std::string as_string(const std::string& source, const std::string& key, const YAML::Node& node) {
  if (!node.IsScalar()) throw ConfigError(at(source, node), key + " must be a string");
  return node.Scalar();
}

inline std::vector<std::uint64_t> as_u64_list(const std::string& source, const std::string& key,
                                              const YAML::Node& node) {
  if (!node.IsSequence()) throw ConfigError(at(source, node), key + " must be a list of integers");
  std::vector<std::uint64_t> out;
  for (const auto& item : node) out.push_back(as_u64(source, key, item));
  return out;
}

}  // namespace detail

/// Parses scenario YAML. Only syntax and types are checked here; see build().
inline ScenarioConfig parse(const std::string& text, const std::string& source = "<config>") {
  using detail::as_string;
  using detail::as_u64;
  using detail::as_u64_list;
  using detail::at;

  ScenarioConfig cfg;
  cfg.source = source;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1), "YAML syntax error: " + e.msg);
  }
  if (root.IsNull()) return cfg;
  if (!root.IsMap()) throw ConfigError(at(source, root), "top level must be a mapping");

  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    const auto& v = kv.second;
    const auto loc = at(source, kv.first);
    cfg.origin[key] = loc;
    if (key == "n") cfg.n = as_u64(source, key, v);
    else if (key == "stakes") cfg.stakes = as_u64_list(source, key, v);
    else if (key == "s_f") cfg.s_f = as_u64(source, key, v);
    else if (key == "d") cfg.d = as_u64(source, key, v);
    else if (key == "rounds") cfg.rounds = as_u64(source, key, v);
    else if (key == "seed") cfg.seed = as_u64(source, key, v);
    else if (key == "delta_bits") cfg.delta_bits = as_u64(source, key, v);
    else if (key == "lambda") cfg.lambda = as_u64(source, key, v);
    else if (key == "attestation") cfg.attestation = as_string(source, key, v);
    else if (key == "tick_budget") cfg.tick_budget = as_u64(source, key, v);
    else if (key == "trials") cfg.trials = as_u64(source, key, v);
    else if (key == "out") cfg.out = as_string(source, key, v);
    else if (key == "adversary") {
      if (v.IsScalar()) {
        cfg.adversary = v.Scalar();
        continue;
      }
      if (!v.IsMap()) throw ConfigError(at(source, v), "adversary must be a strategy name or a mapping");
      for (const auto& akv : v) {
        const auto akey = akv.first.as<std::string>();
        cfg.origin["adversary." + akey] = at(source, akv.first);
        if (akey == "strategy") cfg.adversary = as_string(source, akey, akv.second);
        else if (akey == "corrupted") cfg.corrupted = as_u64_list(source, akey, akv.second);
        else if (akey == "max_delay") cfg.adversary_max_delay = as_u64(source, akey, akv.second);
        else throw ConfigError(at(source, akv.first), "unknown adversary key '" + akey + "'");
      }
    } else if (key == "schedule") {
      if (v.IsScalar()) {
        cfg.schedule = v.Scalar();
        continue;
      }
      if (!v.IsMap()) throw ConfigError(at(source, v), "schedule must be a policy name or a mapping");
      for (const auto& skv : v) {
        const auto skey = skv.first.as<std::string>();
        cfg.origin["schedule." + skey] = at(source, skv.first);
        if (skey == "policy") cfg.schedule = as_string(source, skey, skv.second);
        else if (skey == "max_delay") cfg.schedule_max_delay = as_u64(source, skey, skv.second);
        else if (skey == "victim") cfg.victim = as_u64(source, skey, skv.second);
        else if (skey == "ticks") cfg.starve_ticks = as_u64(source, skey, skv.second);
        else throw ConfigError(at(source, skv.first), "unknown schedule key '" + skey + "'");
      }
    } else if (key == "contributions") {
      if (!v.IsSequence()) throw ConfigError(at(source, v), "contributions must be a list");
      std::vector<setup::Contribution> list;
      for (const auto& item : v) {
        if (!item.IsMap() || !item["issuer"] || !item["words"])
          throw ConfigError(at(source, item), "each contribution needs 'issuer' and 'words'");
        setup::Contribution c;
        const auto issuer = as_u64(source, "issuer", item["issuer"]);
        if (issuer == 0 || issuer > 0xffff) throw ConfigError(at(source, item["issuer"]), "issuer out of range");
        c.issuer = static_cast<ProcessIndex>(issuer);
        c.words = as_u64_list(source, "words", item["words"]);
        list.push_back(std::move(c));
      }
      cfg.contributions = std::move(list);
    } else {
      throw ConfigError(loc, "unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline ScenarioConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path);
}

inline std::vector<std::uint64_t> resolved_stakes(const ScenarioConfig& cfg) {
  if (cfg.stakes.empty()) {
    if (!cfg.n) throw ConfigError(cfg.where("n"), "either n or stakes is required");
    if (*cfg.n == 0) throw ConfigError(cfg.where("n"), "n must be at least 1");
    return std::vector<std::uint64_t>(*cfg.n, 1);
  }
  if (cfg.n && *cfg.n != cfg.stakes.size())
    throw ConfigError(cfg.where("n"), "n = " + std::to_string(*cfg.n) + " but stakes lists " +
                                          std::to_string(cfg.stakes.size()) + " entries");
  return cfg.stakes;
}

/// Default s_f: the largest bound strictly below s_t / 2.
inline std::uint64_t resolved_byzantine_bound(const ScenarioConfig& cfg, std::uint64_t total) {
  return cfg.s_f ? *cfg.s_f : (total - 1) / 2;
}

/// Validates the configuration and turns it into a simulator scenario.
inline simnet::Scenario build(const ScenarioConfig& cfg) {
  const auto stakes = resolved_stakes(cfg);
  std::uint64_t total = 0;
  for (auto s : stakes) {
    if (s == 0) throw ConfigError(cfg.where("stakes"), "every stake must be at least 1");
    total += s;
  }
  const auto s_f = resolved_byzantine_bound(cfg, total);
  if (2 * s_f >= total)
    throw ConfigError(cfg.where("s_f"), "s_f = " + std::to_string(s_f) + " violates s_f < s_t/2 with s_t = " +
                                            std::to_string(total));
  std::optional<StakeTable> table;
  try {
    table.emplace(stakes, s_f);
  } catch (const InvalidStakeTable& e) {
    throw ConfigError(cfg.where("stakes"), e.what());
  }
  const auto n = table->size();

  if (cfg.d == 0) throw ConfigError(cfg.where("d"), "d must be at least 1");
  if (cfg.d > n)
    throw ConfigError(cfg.where("d"), "d = " + std::to_string(cfg.d) + " exceeds n = " + std::to_string(n) +
                                          "; cannot elect more distinct leaders than members");
  if (cfg.rounds == 0) throw ConfigError(cfg.where("rounds"), "rounds must be at least 1");
  if (cfg.delta_bits < 1 || cfg.delta_bits > 64)
    throw ConfigError(cfg.where("delta_bits"), "delta_bits must be in [1, 64]");
  if (static_cast<std::uint64_t>(std::bit_width(total)) >= cfg.delta_bits)
    throw ConfigError(cfg.where("delta_bits"), "delta_bits = " + std::to_string(cfg.delta_bits) +
                                                   " must exceed the bit width of s_t = " + std::to_string(total));
  if (cfg.lambda < 8 || cfg.lambda > 256 || cfg.lambda % 8 != 0)
    throw ConfigError(cfg.where("lambda"), "lambda must be a multiple of 8 in [8, 256]");
  if (cfg.trials == 0) throw ConfigError(cfg.where("trials"), "trials must be at least 1");
  if (cfg.tick_budget == 0) throw ConfigError(cfg.where("tick_budget"), "tick_budget must be at least 1");

  simnet::Scenario sc(*table);
  sc.d = cfg.d;
  sc.rounds = cfg.rounds;
  sc.seed = cfg.seed;
  sc.delta_bits = static_cast<unsigned>(cfg.delta_bits);
  sc.lambda = static_cast<unsigned>(cfg.lambda);
  sc.tick_budget = cfg.tick_budget;

  try {
    sc.attestation = encdom::parse_attestation(cfg.attestation);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.where("attestation"), e.what());
  }

  const auto strategy_key = cfg.origin.contains("adversary.strategy") ? "adversary.strategy" : "adversary";
  try {
    sc.adversary.strategy = simnet::parse_strategy(cfg.adversary);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.where(strategy_key), e.what());
  }
  sc.adversary.max_delay = cfg.adversary_max_delay;
  if (sc.adversary.max_delay == 0) throw ConfigError(cfg.where("adversary.max_delay"), "max_delay must be at least 1");
  if (cfg.corrupted) {
    std::uint64_t held = 0;
    for (auto i : *cfg.corrupted) {
      if (i == 0 || i > n)
        throw ConfigError(cfg.where("adversary.corrupted"), "corrupted index " + std::to_string(i) + " is not in 1.." +
                                                                std::to_string(n));
      if (!sc.adversary.corrupted.insert(static_cast<ProcessIndex>(i)).second)
        throw ConfigError(cfg.where("adversary.corrupted"), "corrupted index " + std::to_string(i) + " listed twice");
      held += table->stake(static_cast<ProcessIndex>(i));
    }
    if (held > s_f)
      throw ConfigError(cfg.where("adversary.corrupted"), "corrupted stake " + std::to_string(held) +
                                                              " exceeds s_f = " + std::to_string(s_f));
  } else if (sc.adversary.strategy != simnet::Strategy::honest) {
    sc.adversary.corrupted = simnet::default_corruption(*table);
  }

  const auto policy_key = cfg.origin.contains("schedule.policy") ? "schedule.policy" : "schedule";
  try {
    sc.schedule.kind = simnet::parse_policy(cfg.schedule);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.where(policy_key), e.what());
  }
  sc.schedule.max_delay = cfg.schedule_max_delay;
  sc.schedule.starve_ticks = cfg.starve_ticks;
  if (sc.schedule.kind == simnet::PolicyKind::random && cfg.schedule_max_delay == 0)
    throw ConfigError(cfg.where("schedule.max_delay"), "max_delay must be at least 1");
  if (sc.schedule.kind == simnet::PolicyKind::starve) {
    if (cfg.victim == 0 || cfg.victim > n)
      throw ConfigError(cfg.where("schedule.victim"), "victim " + std::to_string(cfg.victim) + " is not a member");
    sc.schedule.victim = static_cast<ProcessIndex>(cfg.victim);
  }

  if (cfg.contributions) {
    std::uint64_t width_mask = circuits::word_mask(static_cast<unsigned>(cfg.delta_bits));
    for (const auto& c : *cfg.contributions) {
      if (c.issuer > n)
        throw ConfigError(cfg.where("contributions"), "contribution from unknown process " + std::to_string(c.issuer));
      if (c.words.size() != n + 1)
        throw ConfigError(cfg.where("contributions"), "contribution of process " + std::to_string(c.issuer) + " has " +
                                                          std::to_string(c.words.size()) + " words, expected " +
                                                          std::to_string(n + 1));
      for (auto w : c.words)
        if (w > width_mask)
          throw ConfigError(cfg.where("contributions"), "contribution word " + std::to_string(w) +
                                                            " exceeds delta_bits");
    }
    sc.contributions = cfg.contributions;
  }

  try {
    simnet::validate(sc);
  } catch (const simnet::ScenarioError& e) {
    throw ConfigError(cfg.source, e.what());
  }
  return sc;
}

/// Canonical JSON of every resolved setting. Identical settings give identical text.
inline std::string canonical(const ScenarioConfig& cfg) {
  const auto stakes = resolved_stakes(cfg);
  std::uint64_t total = 0;
  for (auto s : stakes) total += s;
  nlohmann::json j;
  j["stakes"] = stakes;
  j["s_f"] = resolved_byzantine_bound(cfg, total);
  j["d"] = cfg.d;
  j["rounds"] = cfg.rounds;
  j["adversary"] = cfg.adversary;
  j["corrupted"] = cfg.corrupted ? nlohmann::json(*cfg.corrupted) : nlohmann::json(nullptr);
  j["adversary_max_delay"] = cfg.adversary_max_delay;
  j["seed"] = cfg.seed;
  j["delta_bits"] = cfg.delta_bits;
  j["lambda"] = cfg.lambda;
  j["schedule"] = cfg.schedule;
  j["schedule_max_delay"] = cfg.schedule_max_delay;
  j["victim"] = cfg.victim;
  j["starve_ticks"] = cfg.starve_ticks;
  j["attestation"] = cfg.attestation;
  j["tick_budget"] = cfg.tick_budget;
  j["trials"] = cfg.trials;
  if (cfg.contributions) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : *cfg.contributions) list.push_back({{"issuer", c.issuer}, {"words", c.words}});
    j["contributions"] = list;
  }
  return j.dump();
}

inline std::string config_hash(const ScenarioConfig& cfg) {
  const auto text = canonical(cfg);
  return to_hex(sha256(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())));
}

}  // namespace hsort::config
