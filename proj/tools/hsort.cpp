// hsort: run sortition scenarios, fairness experiments and cost reports.
//
// Exit codes: 0 success, 2 invalid configuration or arguments, 3 liveness violation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hsort/config.hpp"
#include "hsort/hsort.hpp"

namespace fs = std::filesystem;
using namespace hsort;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitLiveness = 3;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed, trials, d, rounds, delta_bits, lambda;
  std::optional<std::string> out, adversary;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "scenario YAML file");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--trials", o.trials, "experiment repetitions");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--d", o.d, "permutation length");
  cmd->add_option("--rounds", o.rounds, "number of rounds");
  cmd->add_option("--adversary", o.adversary, "adversary strategy");
  cmd->add_option("--delta-bits", o.delta_bits, "plaintext word width");
  cmd->add_option("--lambda", o.lambda, "voucher and proof length in bits");
}

config::ScenarioConfig load(const Overrides& o) {
  config::ScenarioConfig cfg = o.config_path.empty() ? config::ScenarioConfig{} : config::load_file(o.config_path);
  auto apply = [&cfg](const auto& value, auto& field, const std::string& key, const std::string& flag) {
    if (value) {
      field = *value;
      cfg.set_from_flag(key, flag);
    }
  };
  apply(o.seed, cfg.seed, "seed", "--seed");
  apply(o.trials, cfg.trials, "trials", "--trials");
  apply(o.d, cfg.d, "d", "--d");
  apply(o.rounds, cfg.rounds, "rounds", "--rounds");
  apply(o.delta_bits, cfg.delta_bits, "delta_bits", "--delta-bits");
  apply(o.lambda, cfg.lambda, "lambda", "--lambda");
  apply(o.out, cfg.out, "out", "--out");
  if (o.adversary) {
    cfg.adversary = *o.adversary;
    cfg.set_from_flag("adversary", "--adversary");
    cfg.set_from_flag("adversary.strategy", "--adversary");
  }
  return cfg;
}

std::string header(const config::ScenarioConfig& cfg) { return "# config-hash sha256:" + config::config_hash(cfg) + "\n"; }

std::ofstream open_out(const config::ScenarioConfig& cfg, const std::string& file) {
  fs::create_directories(cfg.out);
  std::ofstream f(fs::path(cfg.out) / file, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (fs::path(cfg.out) / file).string());
  return f;
}

void write_transcript(const config::ScenarioConfig& cfg, const simnet::Transcript& tr) {
  auto f = open_out(cfg, "transcript.jsonl");
  nlohmann::json meta{{"type", "config"}, {"config_hash", "sha256:" + config::config_hash(cfg)},
                      {"config", nlohmann::json::parse(config::canonical(cfg))}};
  f << meta.dump() << '\n' << tr.to_jsonl();
}

/// Network messages and elapsed ticks per round, from the envelope log and outputs.
struct RoundTraffic {
  std::uint64_t messages = 0;
  std::uint64_t ticks = 0;
};

std::map<std::uint64_t, RoundTraffic> traffic(const simnet::Transcript& tr) {
  std::map<std::uint64_t, RoundTraffic> out;
  for (const auto& e : tr.envelopes) ++out[e.round].messages;
  std::map<std::uint64_t, std::pair<std::uint64_t, std::uint64_t>> span;  // min start, max output
  for (const auto& o : tr.outputs) {
    if (tr.corrupted.contains(o.process)) continue;
    auto [it, fresh] = span.try_emplace(o.round, o.started, o.output);
    if (!fresh) {
      it->second.first = std::min(it->second.first, o.started);
      it->second.second = std::max(it->second.second, o.output);
    }
  }
  for (const auto& [r, s] : span) out[r].ticks = s.second - s.first;
  return out;
}

int cmd_elect(config::ScenarioConfig cfg) {
  if (cfg.d != 1) {
    if (cfg.origin.contains("d") && cfg.origin.at("d").starts_with("--"))
      throw config::ConfigError(cfg.where("d"), "elect runs single leader rounds; use permute for d > 1");
    cfg.d = 1;
  }
  auto sc = config::build(cfg);
  const auto tr = simnet::run(std::move(sc));
  write_transcript(cfg, tr);
  const auto per_round = traffic(tr);

  std::ostringstream table;
  table << header(cfg) << "round\tvoucher\telected\tclaimants\taccepted\tproposer\tmessages\tticks\n";
  for (const auto& oc : tr.outcomes) {
    const auto v = tr.voucher(oc.round);
    const auto& t = per_round.count(oc.round) ? per_round.at(oc.round) : RoundTraffic{};
    table << oc.round << '\t' << (v ? to_hex(*v) : "-") << '\t' << oc.elected << '\t' << oc.claimants << '\t'
          << (oc.accepted ? "yes" : "no") << '\t' << oc.proposer << '\t' << t.messages << '\t' << t.ticks << '\n';
  }
  open_out(cfg, "rounds.tsv") << table.str();
  std::cout << table.str();
  return 0;
}

int cmd_permute(const config::ScenarioConfig& cfg) {
  auto sc = config::build(cfg);
  const auto d = sc.d;
  if (cfg.rounds % d != 0)
    throw config::ConfigError(cfg.where("rounds"), "rounds = " + std::to_string(cfg.rounds) +
                                                       " is not a multiple of d = " + std::to_string(d));
  const auto tr = simnet::run(std::move(sc));
  write_transcript(cfg, tr);

  std::ostringstream table;
  table << header(cfg) << "permutation\tleaders\tdistinct\n";
  for (std::uint64_t p = 0; p * d < tr.outcomes.size(); ++p) {
    std::set<ProcessIndex> seen;
    bool distinct = true;
    table << (p + 1) << '\t';
    for (std::uint64_t k = 0; k < d; ++k) {
      const auto e = tr.outcomes[p * d + k].elected;
      distinct &= e != 0 && seen.insert(e).second;
      table << (k ? "," : "") << e;
    }
    table << '\t' << (distinct ? "yes" : "no") << '\n';
  }
  open_out(cfg, "permutations.tsv") << table.str();
  std::cout << table.str();
  return 0;
}

int cmd_stats(const config::ScenarioConfig& cfg) {
  const auto sc = config::build(cfg);
  experiment::ExperimentOptions opt;
  opt.seed = cfg.seed;
  opt.word_bits = sc.delta_bits;
  opt.lambda = sc.lambda;
  // Bulk experiments default to the MAC attestation unless the config pins one.
  opt.scheme = cfg.origin.contains("attestation") ? sc.attestation : encdom::AttestationScheme::hmac_sha256;

  std::ostringstream report;
  report << header(cfg) << "# trials " << cfg.trials << "  d " << sc.d << "  stakes";
  for (auto s : sc.stakes.stakes()) report << ' ' << s;
  report << "\n";
  if (sc.d == 1) {
    const auto st = experiment::ssle_fairness(sc.stakes, cfg.trials, opt);
    report << "# leader frequency\n" << experiment::format_frequency(st.leaders);
    report << "uniqueness_violations " << st.uniqueness_violations << "\n";
  } else {
    const auto st = experiment::slp_fairness(sc.stakes, sc.d, cfg.trials, opt);
    report << "# first pick\n" << experiment::format_frequency(st.first);
    report << "not_permutations " << st.not_permutations << "\n";
    report << "# second pick given first (rows: first pick; columns: observed count / expected S[j]/(s_t - S[i]))\n";
    std::size_t k = 0;
    for (std::size_t i = 1; i <= sc.stakes.size(); ++i) {
      std::uint64_t row_total = 0;
      for (auto c : st.second[i - 1]) row_total += c;
      report << "first=" << i;
      const auto expect = experiment::SlpStats::conditional_expectation(sc.stakes, static_cast<ProcessIndex>(i));
      for (std::size_t j = 0; j < sc.stakes.size(); ++j) {
        report << '\t' << st.second[i - 1][j] << '/';
        report << std::fixed << std::setprecision(4) << expect[j] * static_cast<double>(row_total);
      }
      if (row_total > 0 && k < st.conditional.size()) {
        const auto& c = st.conditional[k++];
        report << "\tchi2 " << c.statistic << " df " << c.dof << " p " << std::setprecision(6) << c.p_value;
      }
      report << '\n';
    }
    report << "pooled chi2 " << st.pooled.statistic << " df " << st.pooled.dof << " p " << st.pooled.p_value << "\n";
  }
  open_out(cfg, "fairness.txt") << report.str();
  std::cout << report.str();
  return 0;
}

int cmd_cost(config::ScenarioConfig cfg, std::optional<std::uint64_t> n, std::optional<std::uint64_t> s_t) {
  std::uint64_t members = 0, total = 0;
  if (n) {
    if (*n == 0) throw config::ConfigError("--n", "n must be at least 1");
    cfg.stakes.clear();
    cfg.n = *n;
    cfg.set_from_flag("n", "--n");
    members = *n;
    total = s_t ? *s_t : *n;
  } else {
    const auto stakes = config::resolved_stakes(cfg);
    members = stakes.size();
    for (auto s : stakes) total += s;
    if (s_t) total = *s_t;
  }
  if (members == 0) throw config::ConfigError("--n", "n must be at least 1");
  if (total == 0) throw config::ConfigError("--st", "s_t must be at least 1");
  auto cc = circuits::CircuitConfig::for_total(total, static_cast<unsigned>(cfg.delta_bits),
                                                static_cast<unsigned>(cfg.lambda));
  try {
    cc.validate();
  } catch (const std::invalid_argument& e) {
    throw config::ConfigError(cfg.where("delta_bits"), e.what());
  }
  const auto text = circuits::cost_report(members, total, cc).to_text();
  std::ostringstream out;
  out << header(cfg) << text;
  open_out(cfg, "cost.txt") << out.str();
  std::cout << out.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hsort: homomorphic sortition simulator"};
  app.require_subcommand(1);
  Overrides elect_o, permute_o, stats_o, cost_o;
  std::optional<std::uint64_t> cost_n, cost_st;
  auto* elect = app.add_subcommand("elect", "run single leader election rounds");
  add_common(elect, elect_o);
  auto* permute = app.add_subcommand("permute", "run leader permutations of length d");
  add_common(permute, permute_o);
  auto* stats = app.add_subcommand("stats", "fairness statistics over many trials");
  add_common(stats, stats_o);
  auto* cost = app.add_subcommand("cost", "circuit cost and communication report");
  add_common(cost, cost_o);
  cost->add_option("--n", cost_n, "committee size");
  cost->add_option("--st", cost_st, "total stake");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (elect->parsed()) return cmd_elect(load(elect_o));
    if (permute->parsed()) return cmd_permute(load(permute_o));
    if (stats->parsed()) return cmd_stats(load(stats_o));
    if (cost->parsed()) return cmd_cost(load(cost_o), cost_n, cost_st);
  } catch (const config::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const simnet::LivenessViolation& e) {
    std::cerr << "liveness violation: " << e.what() << "\n";
    return kExitLiveness;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
