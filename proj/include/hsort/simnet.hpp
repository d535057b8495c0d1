#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hsort/bytes.hpp"
#include "hsort/chain.hpp"
#include "hsort/circuits.hpp"
#include "hsort/encdom.hpp"
#include "hsort/setup.hpp"
#include "hsort/sortition.hpp"
#include "hsort/stake.hpp"

namespace hsort::simnet {

using circuits::CostAccumulator;

// ---------------------------------------------------------------------------
// Adversary and schedule configuration.

enum class Strategy { honest, withhold_shares, forge_shares, replay, equivocate_shares, delay_max };

inline constexpr Strategy kAllStrategies[] = {Strategy::honest, Strategy::withhold_shares, Strategy::forge_shares,
                                              Strategy::replay, Strategy::equivocate_shares, Strategy::delay_max};

inline std::string_view name(Strategy s) {
  switch (s) {
    case Strategy::honest: return "honest";
    case Strategy::withhold_shares: return "withhold-shares";
    case Strategy::forge_shares: return "forge-shares";
    case Strategy::replay: return "replay";
    case Strategy::equivocate_shares: return "equivocate-shares";
    case Strategy::delay_max: return "delay-max";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view text) {
  for (auto s : kAllStrategies)
    if (name(s) == text) return s;
  throw std::invalid_argument("unknown adversary strategy '" + std::string(text) + "'");
}

struct AdversaryProfile {
  std::set<ProcessIndex> corrupted;
  Strategy strategy = Strategy::honest;
  std::uint64_t max_delay = 16;
  /// Corrupted processes also push bogus and stolen block proposals.
  bool attack_proposals = true;
};

/// Highest indices first while their stake stays within s_f.
inline std::set<ProcessIndex> default_corruption(const StakeTable& stakes) {
  std::set<ProcessIndex> out;
  std::uint64_t used = 0;
  for (auto i = static_cast<ProcessIndex>(stakes.size()); i >= 1; --i) {
    if (used + stakes.stake(i) <= stakes.byzantine_bound()) {
      used += stakes.stake(i);
      out.insert(i);
    }
  }
  return out;
}

enum class PolicyKind { fifo, random, starve, corrupted_first };

inline std::string_view name(PolicyKind p) {
  switch (p) {
    case PolicyKind::fifo: return "fifo";
    case PolicyKind::random: return "random";
    case PolicyKind::starve: return "starve";
    case PolicyKind::corrupted_first: return "corrupted-first";
  }
  return "?";
}

inline PolicyKind parse_policy(std::string_view text) {
  for (auto p : {PolicyKind::fifo, PolicyKind::random, PolicyKind::starve, PolicyKind::corrupted_first})
    if (name(p) == text) return p;
  throw std::invalid_argument("unknown schedule policy '" + std::string(text) + "'");
}

struct SchedulePolicy {
  PolicyKind kind = PolicyKind::fifo;
  std::uint64_t max_delay = 1;  // random: delays drawn from [1, max_delay]
  ProcessIndex victim = 0;      // starve: nothing reaches the victim before tick starve_ticks
  std::uint64_t starve_ticks = 1;
};

/// Assigns delivery ticks. Every delay is at least one tick and bounded.
class Scheduler {
 public:
  Scheduler(SchedulePolicy policy, const AdversaryProfile& adversary, std::uint64_t seed)
      : policy_(policy), adversary_(adversary), rng_(seed ^ 0x5c4ed011e5eedULL) {}

  std::uint64_t delivery_time(ProcessIndex sender, ProcessIndex recipient, std::uint64_t now) {
    std::uint64_t delay = 1;
    switch (policy_.kind) {
      case PolicyKind::fifo: break;
      case PolicyKind::random:
        delay = std::uniform_int_distribution<std::uint64_t>(1, std::max<std::uint64_t>(1, policy_.max_delay))(rng_);
        break;
      case PolicyKind::starve:
        break;
      case PolicyKind::corrupted_first:
        delay = adversary_.corrupted.contains(sender) ? 1 : 2;
        break;
    }
    if (adversary_.strategy == Strategy::delay_max && !adversary_.corrupted.contains(sender))
      delay = std::max(delay, adversary_.max_delay);
    // The victim's inbox stays frozen until tick starve_ticks, then flushes.
    if (policy_.kind == PolicyKind::starve && recipient == policy_.victim)
      return std::max(now + delay, policy_.starve_ticks);
    return now + delay;
  }

  std::uint64_t bound() const {
    std::uint64_t b = 1;
    if (policy_.kind == PolicyKind::random) b = std::max<std::uint64_t>(1, policy_.max_delay);
    if (policy_.kind == PolicyKind::starve) b = std::max<std::uint64_t>(1, policy_.starve_ticks);
    if (policy_.kind == PolicyKind::corrupted_first) b = 2;
    if (adversary_.strategy == Strategy::delay_max) b = std::max(b, adversary_.max_delay);
    return b;
  }

 private:
  SchedulePolicy policy_;
  AdversaryProfile adversary_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Scenario and transcript.

struct Scenario {
  explicit Scenario(StakeTable s) : stakes(std::move(s)) {}

  StakeTable stakes;
  std::uint64_t d = 1;
  std::uint64_t rounds = 1;
  AdversaryProfile adversary;
  SchedulePolicy schedule;
  std::uint64_t seed = 0;
  unsigned delta_bits = 64;
  unsigned lambda = 256;
  encdom::AttestationScheme attestation = encdom::AttestationScheme::ed25519;
  std::uint64_t tick_budget = 100000;
  bool run_chain = true;
  bool shuffle_tasks = false;
  bool record_envelopes = true;
  std::optional<std::vector<setup::Contribution>> contributions;
};

struct ScenarioError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline void validate(const Scenario& sc) {
  const auto n = sc.stakes.size();
  if (sc.d == 0) throw ScenarioError("d must be at least 1");
  if (sc.d > n) throw ScenarioError("d = " + std::to_string(sc.d) + " exceeds the committee size " + std::to_string(n));
  if (sc.rounds == 0) throw ScenarioError("rounds must be at least 1");
  if (sc.delta_bits < 1 || sc.delta_bits > 64) throw ScenarioError("delta_bits must be in [1, 64]");
  if (std::bit_width(sc.stakes.total()) >= sc.delta_bits)
    throw ScenarioError("delta_bits = " + std::to_string(sc.delta_bits) + " leaves no room above the total stake " +
                        std::to_string(sc.stakes.total()));
  if (sc.lambda < 8 || sc.lambda > 256 || sc.lambda % 8 != 0)
    throw ScenarioError("lambda must be a multiple of 8 in [8, 256]");
  std::uint64_t corrupted = 0;
  for (auto i : sc.adversary.corrupted) {
    if (!sc.stakes.contains(i)) throw ScenarioError("corrupted process " + std::to_string(i) + " is not a member");
    corrupted += sc.stakes.stake(i);
  }
  if (corrupted > sc.stakes.byzantine_bound())
    throw ScenarioError("corrupted stake " + std::to_string(corrupted) + " exceeds s_f = " +
                        std::to_string(sc.stakes.byzantine_bound()));
  if (sc.adversary.max_delay == 0) throw ScenarioError("adversary max_delay must be at least 1");
  if (sc.schedule.kind == PolicyKind::random && sc.schedule.max_delay == 0)
    throw ScenarioError("schedule max_delay must be at least 1");
  if (sc.schedule.kind == PolicyKind::starve && !sc.stakes.contains(sc.schedule.victim))
    throw ScenarioError("starve victim " + std::to_string(sc.schedule.victim) + " is not a member");
  if (sc.tick_budget == 0) throw ScenarioError("tick budget must be at least 1");
}

enum class MessageKind { pvoucher, proposal, malformed };

inline std::string_view name(MessageKind k) {
  switch (k) {
    case MessageKind::pvoucher: return "PVoucher";
    case MessageKind::proposal: return "Proposal";
    case MessageKind::malformed: return "malformed";
  }
  return "?";
}

struct EnvelopeRecord {
  std::uint64_t seq = 0;
  ProcessIndex sender = 0;
  ProcessIndex recipient = 0;
  MessageKind kind = MessageKind::pvoucher;
  std::uint64_t round = 0;
  std::uint64_t enqueued = 0;
  std::uint64_t delivered = 0;
  std::size_t size = 0;
};

struct VoucherOutput {
  ProcessIndex process = 0;
  std::uint64_t round = 0;
  Bytes voucher;
  std::uint64_t started = 0;
  std::uint64_t output = 0;
};

struct MessageCounts {
  std::uint64_t pvoucher_network = 0;  // PVoucher envelopes between distinct processes
  std::uint64_t pvoucher_local = 0;    // own shares handed to the local engine
  std::uint64_t proposals = 0;
  std::uint64_t malformed = 0;
  std::uint64_t shares_invalid = 0;
  std::uint64_t shares_duplicate = 0;
  std::uint64_t proposals_rejected = 0;
  std::uint64_t correct_enqueued = 0;   // envelopes between two correct processes
  std::uint64_t correct_delivered = 0;
};

struct Transcript {
  std::size_t n = 0;
  std::uint64_t d = 1;
  std::uint64_t rounds = 0;
  std::uint64_t seed = 0;
  std::set<ProcessIndex> corrupted;
  Strategy strategy = Strategy::honest;
  std::uint64_t delay_bound = 1;

  std::vector<EnvelopeRecord> envelopes;
  std::vector<VoucherOutput> outputs;
  std::vector<chain::RoundOutcome> outcomes;
  MessageCounts counts;
  std::uint64_t final_tick = 0;
  bool vouchers_agree = true;

  std::shared_ptr<encdom::AuditLog> audit;
  sortition::SetupArtifacts setup;
  std::vector<CostAccumulator> cost;  // per process, index - 1

  const VoucherOutput* output(ProcessIndex process, std::uint64_t round) const {
    for (const auto& o : outputs)
      if (o.process == process && o.round == round) return &o;
    return nullptr;
  }

  /// The voucher output by the correct processes for a round.
  std::optional<Bytes> voucher(std::uint64_t round) const {
    for (const auto& o : outputs)
      if (o.round == round && !corrupted.contains(o.process)) return o.voucher;
    return std::nullopt;
  }

  std::string to_jsonl() const {
    using nlohmann::json;
    std::string out;
    auto line = [&out](const json& j) {
      out += j.dump();
      out += '\n';
    };
    line({{"type", "scenario"},
          {"n", n},
          {"d", d},
          {"rounds", rounds},
          {"seed", seed},
          {"corrupted", std::vector<ProcessIndex>(corrupted.begin(), corrupted.end())},
          {"strategy", std::string(name(strategy))},
          {"delay_bound", delay_bound},
          {"seed_handle", setup.seed.valid() ? to_hex(setup.seed.id()) : ""}});
    for (const auto& e : envelopes)
      line({{"type", "envelope"},
            {"seq", e.seq},
            {"sender", e.sender},
            {"recipient", e.recipient},
            {"kind", std::string(name(e.kind))},
            {"round", e.round},
            {"enqueued", e.enqueued},
            {"delivered", e.delivered},
            {"size", e.size}});
    for (const auto& o : outputs)
      line({{"type", "output"},
            {"process", o.process},
            {"round", o.round},
            {"voucher", to_hex(o.voucher)},
            {"started", o.started},
            {"output", o.output}});
    for (const auto& r : outcomes)
      line({{"type", "outcome"},
            {"round", r.round},
            {"elected", r.elected},
            {"claimants", r.claimants},
            {"accepted", r.accepted},
            {"proposer", r.proposer},
            {"accepts", r.accepts},
            {"wrong_accepts", r.wrong_accepts}});
    line({{"type", "counts"},
          {"pvoucher_network", counts.pvoucher_network},
          {"pvoucher_local", counts.pvoucher_local},
          {"proposals", counts.proposals},
          {"malformed", counts.malformed},
          {"shares_invalid", counts.shares_invalid},
          {"shares_duplicate", counts.shares_duplicate},
          {"proposals_rejected", counts.proposals_rejected},
          {"final_tick", final_tick}});
    if (audit) {
      for (const auto& rec : audit->records()) {
        if (rec.event == encdom::AuditEvent::peek) continue;
        line({{"type", "audit"},
              {"event", std::string(encdom::name(rec.event))},
              {"handle_id", to_hex(rec.handle)},
              {"round", rec.round},
              {"issuer_set", rec.issuers},
              {"origin", rec.origin}});
      }
    }
    return out;
  }
};

struct LivenessViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// The simulator.

class Simulation {
 public:
  explicit Simulation(Scenario scenario) : sc_(std::move(scenario)), scheduler_(sc_.schedule, sc_.adversary, sc_.seed),
                                           rng_(sc_.seed ^ 0xad7e75a7ULL) {
    validate(sc_);
    const auto n = sc_.stakes.size();
    keys_ = encdom::keygen(sc_.stakes, sc_.attestation, sc_.seed);
    domain_ = std::make_shared<encdom::ThresholdDomain>(sc_.stakes, keys_.pub,
                                                        encdom::DomainOptions{sc_.delta_bits, sc_.lambda});

    std::vector<setup::Contribution> contributions;
    if (sc_.contributions) {
      contributions = *sc_.contributions;
    } else {
      for (std::size_t i = 1; i <= n; ++i) {
        const auto who = static_cast<ProcessIndex>(i);
        std::mt19937_64 local(derive_seed("contribution", who));
        auto c = setup::random_contribution(who, n, sc_.delta_bits, local);
        if (hostile(who)) std::fill(c.words.begin(), c.words.end(), 0);
        contributions.push_back(std::move(c));
      }
    }
    auto ceremony = setup::combine(contributions, *domain_);
    setup_ = ceremony.artifacts;

    for (std::size_t i = 1; i <= n; ++i) {
      const auto who = static_cast<ProcessIndex>(i);
      const auto ticket = setup::deliver_ticket(ceremony, who, who);
      nodes_.push_back(std::make_unique<Node>(Node{
          who, sc_.adversary.corrupted.contains(who), ticket,
          sortition::Engine(who, domain_, setup_, keys_.share(who)), chain::Driver(who, ticket, sc_.lambda),
          CostAccumulator(sc_.stakes.total()), {}, {}, {}}));
    }

    tr_.n = n;
    tr_.d = sc_.d;
    tr_.rounds = sc_.rounds;
    tr_.seed = sc_.seed;
    tr_.corrupted = sc_.adversary.corrupted;
    tr_.strategy = sc_.adversary.strategy;
    tr_.delay_bound = scheduler_.bound();
    tr_.audit = domain_->audit_ptr();
    tr_.setup = setup_;
  }

  const encdom::ThresholdDomain& domain() const { return *domain_; }
  const sortition::SetupArtifacts& setup() const { return setup_; }
  const sortition::Engine& engine(ProcessIndex i) const { return nodes_.at(i - 1)->engine; }

  Transcript run() {
    std::vector<std::uint64_t> openers;
    for (const auto& t : chain::pipeline_plan(sc_.rounds, sc_.d))
      if (!t.after) openers.push_back(t.round);
    if (sc_.shuffle_tasks) std::shuffle(openers.begin(), openers.end(), rng_);
    for (auto r : openers)
      for (auto& node : nodes_) start_round(*node, r);

    while (!queue_.empty()) {
      Envelope env = queue_.top();
      queue_.pop();
      if (env.delivery > sc_.tick_budget)
        throw LivenessViolation("tick budget of " + std::to_string(sc_.tick_budget) + " exhausted at round " +
                                std::to_string(env.round));
      now_ = env.delivery;
      if (!nodes_[env.sender - 1]->corrupted && !nodes_[env.recipient - 1]->corrupted) ++tr_.counts.correct_delivered;
      deliver(env);
    }

    for (const auto& node : nodes_) {
      if (node->corrupted) continue;
      for (std::uint64_t r = 1; r <= sc_.rounds; ++r)
        if (!node->done.contains(r))
          throw LivenessViolation("process " + std::to_string(node->id) + " has no voucher for round " +
                                  std::to_string(r) + " after the network went quiet");
    }
    finish();
    return std::move(tr_);
  }

 private:
  struct Node {
    ProcessIndex id;
    bool corrupted;
    circuits::Word ticket;
    sortition::Engine engine;
    chain::Driver driver;
    CostAccumulator cost;
    std::map<std::uint64_t, std::uint64_t> started;
    std::set<std::uint64_t> done;
    std::set<std::uint64_t> stolen;
  };

  struct Envelope {
    std::uint64_t seq;
    std::uint64_t delivery;
    ProcessIndex sender;
    ProcessIndex recipient;
    std::uint64_t round;
    Bytes payload;
  };

  struct Later {
    bool operator()(const Envelope& a, const Envelope& b) const {
      return a.delivery != b.delivery ? a.delivery > b.delivery : a.seq > b.seq;
    }
  };

  std::uint64_t derive_seed(std::string_view label, std::uint64_t i) const {
    return read_be64(Sha256{}.update("hsort/simnet").update(label).update_be64(sc_.seed).update_be64(i).finish());
  }

  bool hostile(ProcessIndex i) const {
    return sc_.adversary.corrupted.contains(i) && sc_.adversary.strategy != Strategy::honest;
  }

  void send(ProcessIndex from, ProcessIndex to, MessageKind kind, std::uint64_t round, Bytes payload) {
    Envelope env{seq_++, scheduler_.delivery_time(from, to, now_), from, to, round, std::move(payload)};
    if (kind == MessageKind::pvoucher) ++tr_.counts.pvoucher_network;
    if (kind == MessageKind::proposal) ++tr_.counts.proposals;
    if (!nodes_[from - 1]->corrupted && !nodes_[to - 1]->corrupted) ++tr_.counts.correct_enqueued;
    if (sc_.record_envelopes)
      tr_.envelopes.push_back({env.seq, from, to, kind, round, now_, env.delivery, env.payload.size()});
    queue_.push(std::move(env));
  }

  void broadcast(ProcessIndex from, MessageKind kind, std::uint64_t round, const Bytes& payload) {
    for (const auto& other : nodes_)
      if (other->id != from) send(from, other->id, kind, round, payload);
  }

  void start_round(Node& node, std::uint64_t r) {
    node.started[r] = now_;
    node.engine.begin_round(r, sc_.d, node.cost);
    const auto mine = node.engine.publish(r);
    node.engine.on_pvoucher(r, mine.share);
    ++tr_.counts.pvoucher_local;
    emit_shares(node, r, mine);
    check_output(node, r);
  }

  void emit_shares(Node& node, std::uint64_t r, const sortition::PVoucher& mine) {
    const auto honest_payload = mine.encode();
    if (!hostile(node.id) || sc_.adversary.strategy == Strategy::delay_max) {
      broadcast(node.id, MessageKind::pvoucher, r, honest_payload);
      return;
    }
    const auto& key = keys_.share(node.id);
    switch (sc_.adversary.strategy) {
      case Strategy::withhold_shares:
        break;
      case Strategy::forge_shares: {
        for (const auto& other : nodes_) {
          if (other->id == node.id) continue;
          auto wrong = mine;
          for (auto& b : wrong.share.digest) b = static_cast<std::uint8_t>(rng_());
          wrong.share.attestation = encdom::attest(key, wrong.share.handle_id, wrong.share.digest, node.id);
          send(node.id, other->id, MessageKind::pvoucher, r, wrong.encode());

          // Claims a share on behalf of the first correct process.
          for (const auto& victim : nodes_) {
            if (victim->corrupted) continue;
            auto fake = mine;
            fake.share.index = victim->id;
            for (auto& b : fake.share.attestation) b = static_cast<std::uint8_t>(rng_());
            send(node.id, other->id, MessageKind::pvoucher, r, fake.encode());
            break;
          }
          Bytes garbage(honest_payload.begin(), honest_payload.begin() + 12);
          send(node.id, other->id, MessageKind::malformed, r, std::move(garbage));
        }
        break;
      }
      case Strategy::replay: {
        for (const auto& other : nodes_) {
          if (other->id == node.id) continue;
          send(node.id, other->id, MessageKind::pvoucher, r, honest_payload);
          send(node.id, other->id, MessageKind::pvoucher, r, honest_payload);
          if (const auto* prev = node.engine.state(r - 1); r > 1 && prev) {
            sortition::PVoucher stale{r, mine.permutation, domain_->pdec(node.id, key, prev->voucher_handle())};
            send(node.id, other->id, MessageKind::pvoucher, r, stale.encode());
          }
        }
        break;
      }
      case Strategy::equivocate_shares: {
        const auto& st = *node.engine.state(r);
        sortition::PVoucher other_handle{r, mine.permutation, domain_->pdec(node.id, key, st.randomness)};
        const auto split = other_handle.encode();
        for (const auto& other : nodes_) {
          if (other->id == node.id) continue;
          send(node.id, other->id, MessageKind::pvoucher, r, other->id % 2 == 0 ? split : honest_payload);
        }
        break;
      }
      case Strategy::honest:
      case Strategy::delay_max:
        break;
    }
  }

  void check_output(Node& node, std::uint64_t r) {
    if (node.done.contains(r) || !node.engine.has_round(r)) return;
    auto v = node.engine.try_decrypt(r);
    if (!v) return;
    node.done.insert(r);
    tr_.outputs.push_back({node.id, r, *v, node.started[r], now_});

    if (sc_.run_chain) {
      Bytes payload;
      const std::string text = "block " + std::to_string(r) + " from " + std::to_string(node.id);
      payload.assign(text.begin(), text.end());
      auto mine = node.driver.on_voucher(r, *v, payload);
      if (mine) {
        if (!(hostile(node.id) && sc_.adversary.strategy == Strategy::withhold_shares))
          broadcast(node.id, MessageKind::proposal, r, mine->encode());
      } else if (hostile(node.id) && sc_.adversary.attack_proposals) {
        chain::BlockProposal bogus{r, node.id, sortition::claim(node.ticket, r, sc_.lambda), payload};
        broadcast(node.id, MessageKind::proposal, r, bogus.encode());
      }
    }

    if (r < sc_.rounds && r % sc_.d != 0 && node.engine.can_begin(r + 1, sc_.d)) start_round(node, r + 1);
  }

  void deliver(const Envelope& env) {
    auto& node = *nodes_[env.recipient - 1];
    const auto& bytes = env.payload;
    auto has_tag = [&bytes](std::string_view tag) {
      return bytes.size() >= tag.size() && std::equal(tag.begin(), tag.end(), bytes.begin());
    };
    try {
      if (has_tag(sortition::PVoucher::kTag)) {
        const auto msg = sortition::PVoucher::decode(bytes);
        const auto verdict = node.engine.on_pvoucher(msg.round, msg.share);
        if (verdict == sortition::ShareVerdict::invalid) ++tr_.counts.shares_invalid;
        if (verdict == sortition::ShareVerdict::duplicate) ++tr_.counts.shares_duplicate;
        if (verdict == sortition::ShareVerdict::accepted && hostile(node.id) &&
            sc_.adversary.strategy == Strategy::replay && msg.share.index != node.id &&
            !sc_.adversary.corrupted.contains(msg.share.index))
          broadcast(node.id, MessageKind::pvoucher, msg.round, bytes);
        if (msg.round >= 1 && msg.round <= sc_.rounds) check_output(node, msg.round);
      } else if (has_tag(chain::BlockProposal::kTag)) {
        const auto p = chain::BlockProposal::decode(bytes);
        if (hostile(node.id) && sc_.adversary.attack_proposals) {
          if (p.proposer != node.id && node.stolen.insert(p.round).second) {
            chain::BlockProposal stolen{p.round, node.id, p.proof, p.payload};
            broadcast(node.id, MessageKind::proposal, p.round, stolen.encode());
          }
          return;
        }
        if (p.proposer != env.sender) {
          ++tr_.counts.proposals_rejected;
          return;
        }
        if (node.driver.on_proposal(p) == chain::ProposalVerdict::rejected) ++tr_.counts.proposals_rejected;
      } else {
        ++tr_.counts.malformed;
      }
    } catch (const std::out_of_range&) {
      ++tr_.counts.malformed;
    } catch (const std::invalid_argument&) {
      ++tr_.counts.malformed;
    }
  }

  void finish() {
    tr_.final_tick = now_;
    for (const auto& node : nodes_) tr_.cost.push_back(node->cost);

    for (std::uint64_t r = 1; r <= sc_.rounds; ++r) {
      chain::RoundOutcome oc;
      oc.round = r;
      std::optional<Bytes> agreed;
      for (const auto& o : tr_.outputs) {
        if (o.round != r || tr_.corrupted.contains(o.process)) continue;
        if (!agreed) agreed = o.voucher;
        else if (*agreed != o.voucher) tr_.vouchers_agree = false;
      }
      if (agreed) {
        for (const auto& node : nodes_) {
          if (sortition::verify(node->id, sortition::claim(node->ticket, r, sc_.lambda), *agreed)) {
            ++oc.claimants;
            oc.elected = node->id;
          }
        }
        if (oc.claimants != 1) oc.elected = 0;
      }
      if (sc_.run_chain) {
        bool all = true;
        for (const auto& node : nodes_) {
          if (node->corrupted) continue;
          const auto* acc = node->driver.accepted(r);
          if (!acc) {
            all = false;
            continue;
          }
          ++oc.accepts;
          oc.proposer = acc->proposer;
          if (acc->proposer != oc.elected) {
            ++oc.wrong_accepts;
            all = false;
          }
        }
        oc.accepted = all && oc.elected != 0;
      }
      tr_.outcomes.push_back(oc);
    }
  }

  Scenario sc_;
  Scheduler scheduler_;
  std::mt19937_64 rng_;
  encdom::KeyMaterial keys_;
  std::shared_ptr<encdom::ThresholdDomain> domain_;
  sortition::SetupArtifacts setup_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::priority_queue<Envelope, std::vector<Envelope>, Later> queue_;
  std::uint64_t now_ = 0;
  std::uint64_t seq_ = 0;
  Transcript tr_;
};

inline Transcript run(Scenario scenario) { return Simulation(std::move(scenario)).run(); }

}  // namespace hsort::simnet
