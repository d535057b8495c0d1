#include <gtest/gtest.h>

#include "hsort/simnet.hpp"

using namespace hsort;
using namespace hsort::simnet;

namespace {

Scenario scenario(std::vector<std::uint64_t> stakes, std::uint64_t s_f, std::uint64_t rounds, std::uint64_t seed = 1) {
  Scenario sc{StakeTable(std::move(stakes), s_f)};
  sc.rounds = rounds;
  sc.seed = seed;
  sc.attestation = encdom::AttestationScheme::hmac_sha256;
  return sc;
}

void expect_unique_accepted(const Transcript& tr) {
  EXPECT_TRUE(tr.vouchers_agree);
  ASSERT_EQ(tr.outcomes.size(), tr.rounds);
  for (const auto& o : tr.outcomes) {
    EXPECT_EQ(o.claimants, 1u) << "round " << o.round;
    EXPECT_NE(o.elected, 0u) << "round " << o.round;
    EXPECT_EQ(o.wrong_accepts, 0u) << "round " << o.round;
  }
}

}  // namespace

TEST(Simnet, HonestFourProcesses) {
  auto sc = scenario({1, 1, 1, 1}, 1, 10);
  sc.attestation = encdom::AttestationScheme::ed25519;
  const auto tr = run(sc);
  expect_unique_accepted(tr);
  for (const auto& o : tr.outcomes) EXPECT_TRUE(o.accepted);
  for (std::uint64_t r = 1; r <= 10; ++r)
    for (ProcessIndex p = 1; p <= 4; ++p) ASSERT_NE(tr.output(p, r), nullptr);
}

TEST(Simnet, WithholdingAtByzantineBoundStillTerminates) {
  auto sc = scenario({1, 2, 3, 4, 10}, 9, 20);
  sc.adversary.corrupted = {1, 2, 3};  // stake 6 of s_f = 9
  sc.adversary.strategy = Strategy::withhold_shares;
  const auto tr = run(sc);
  EXPECT_TRUE(tr.vouchers_agree);
  for (std::uint64_t r = 1; r <= 20; ++r) {
    EXPECT_NE(tr.output(4, r), nullptr);
    EXPECT_NE(tr.output(5, r), nullptr);
  }
}

TEST(Simnet, SameSeedByteIdenticalTranscript) {
  auto sc = scenario({1, 2, 3}, 2, 6, 99);
  sc.d = 3;
  sc.schedule = {PolicyKind::random, 4, 0, 1};
  EXPECT_EQ(run(sc).to_jsonl(), run(sc).to_jsonl());
}

TEST(Simnet, DifferentSeedsDifferentVouchers) {
  const auto a = run(scenario({1, 1, 1}, 1, 3, 1));
  const auto b = run(scenario({1, 1, 1}, 1, 3, 2));
  EXPECT_NE(a.voucher(1), b.voucher(1));
}

TEST(Simnet, FifoDeliversInSendOrderWithUnitLatency) {
  const auto tr = run(scenario({1, 1, 1}, 1, 4));
  std::uint64_t last_seq = 0;
  std::map<std::pair<ProcessIndex, ProcessIndex>, std::uint64_t> last_delivery;
  for (const auto& e : tr.envelopes) {
    EXPECT_EQ(e.delivered, e.enqueued + 1);
    EXPECT_GE(e.seq, last_seq);
    last_seq = e.seq;
    auto& prev = last_delivery[{e.sender, e.recipient}];
    EXPECT_GE(e.delivered, prev);
    prev = e.delivered;
  }
  for (const auto& o : tr.outputs) EXPECT_EQ(o.output - o.started, 1u);
}

TEST(Simnet, StarvedVictimFrozenUntilReleaseTick) {
  auto sc = scenario({1, 1, 1, 1}, 1, 1);
  sc.schedule = {PolicyKind::starve, 1, 2, 30};
  const auto tr = run(sc);
  for (const auto& e : tr.envelopes)
    if (e.recipient == 2) {
      EXPECT_GE(e.delivered, 30u);
    }
  EXPECT_EQ(tr.output(2, 1)->output, 30u);
  EXPECT_EQ(tr.output(1, 1)->output, 1u);
  EXPECT_TRUE(tr.vouchers_agree);
}

TEST(Simnet, CorruptedFirstOrdersByzantineTrafficAhead) {
  auto sc = scenario({1, 1, 1, 1}, 1, 2);
  sc.adversary.corrupted = {4};
  sc.schedule.kind = PolicyKind::corrupted_first;
  const auto tr = run(sc);
  for (const auto& e : tr.envelopes) EXPECT_EQ(e.delivered - e.enqueued, e.sender == 4 ? 1u : 2u);
  expect_unique_accepted(tr);
}

TEST(Simnet, RandomSchedulesNeverBreakAgreement) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto sc = scenario({1, 2, 1, 3}, 3, 4, seed);
    sc.d = 2;
    sc.schedule = {PolicyKind::random, 6, 0, 1};
    sc.record_envelopes = false;
    const auto tr = run(sc);
    expect_unique_accepted(tr);
    EXPECT_LE(tr.final_tick, 4 * 6u + 6u);
  }
}

TEST(Simnet, ReliableChannelsBetweenCorrectProcesses) {
  auto sc = scenario({1, 1, 1, 1, 1}, 2, 5, 3);
  sc.adversary.corrupted = {1, 2};
  sc.adversary.strategy = Strategy::forge_shares;
  sc.schedule = {PolicyKind::random, 3, 0, 1};
  const auto tr = run(sc);
  EXPECT_GT(tr.counts.correct_enqueued, 0u);
  EXPECT_EQ(tr.counts.correct_enqueued, tr.counts.correct_delivered);
}

TEST(Simnet, MessageComplexityPerRound) {
  for (std::size_t n : {2u, 4u, 8u}) {
    auto sc = scenario(std::vector<std::uint64_t>(n, 1), (n - 1) / 2, 3);
    sc.run_chain = false;
    const auto tr = run(sc);
    EXPECT_EQ(tr.counts.pvoucher_network, 3 * n * (n - 1));
    EXPECT_EQ(tr.counts.pvoucher_local, 3 * n);
  }
}

TEST(Simnet, ContinuationRoundsStartOnPredecessorOutput) {
  // Unit stakes: no process reaches the threshold on its own share.
  auto sc = scenario({1, 1, 1}, 1, 6);
  sc.d = 3;
  const auto tr = run(sc);
  for (ProcessIndex p = 1; p <= 3; ++p) {
    EXPECT_EQ(tr.output(p, 1)->started, 0u);
    EXPECT_EQ(tr.output(p, 4)->started, 0u);
    EXPECT_EQ(tr.output(p, 2)->started, tr.output(p, 1)->output);
    EXPECT_EQ(tr.output(p, 3)->started, tr.output(p, 2)->output);
    EXPECT_EQ(tr.output(p, 3)->output, 3u);
  }
  std::set<ProcessIndex> leaders;
  for (std::uint64_t r = 1; r <= 3; ++r) leaders.insert(tr.outcomes[r - 1].elected);
  EXPECT_EQ(leaders.size(), 3u);
}

TEST(Simnet, TickBudgetExhaustionIsLivenessViolation) {
  auto sc = scenario({1, 1, 1, 1}, 1, 1);
  sc.adversary.corrupted = {4};
  sc.adversary.strategy = Strategy::delay_max;
  sc.adversary.max_delay = 16;
  sc.tick_budget = 5;
  EXPECT_THROW(run(sc), LivenessViolation);
}

TEST(Simnet, ValidationRejectsBadScenarios) {
  auto base = scenario({1, 1, 1}, 1, 1);
  auto bad = base;
  bad.d = 4;
  EXPECT_THROW(run(bad), ScenarioError);
  bad = base;
  bad.d = 0;
  EXPECT_THROW(run(bad), ScenarioError);
  bad = base;
  bad.rounds = 0;
  EXPECT_THROW(run(bad), ScenarioError);
  bad = base;
  bad.delta_bits = 2;  // s_t = 3 needs two bits
  EXPECT_THROW(run(bad), ScenarioError);
  bad = base;
  bad.lambda = 12;
  EXPECT_THROW(run(bad), ScenarioError);
  bad = base;
  bad.adversary.corrupted = {1, 2};
  EXPECT_THROW(run(bad), ScenarioError);
  bad = base;
  bad.adversary.corrupted = {7};
  EXPECT_THROW(run(bad), ScenarioError);
  bad = base;
  bad.schedule = {PolicyKind::starve, 1, 9, 3};
  EXPECT_THROW(run(bad), ScenarioError);
  bad = base;
  bad.tick_budget = 0;
  EXPECT_THROW(run(bad), ScenarioError);
}

TEST(Simnet, DefaultCorruptionStaysWithinBound) {
  EXPECT_EQ(default_corruption(StakeTable({1, 2, 3, 4, 10}, 9)), (std::set<ProcessIndex>{2, 3, 4}));
  EXPECT_EQ(default_corruption(StakeTable({1, 1, 1, 1}, 1)), (std::set<ProcessIndex>{4}));
  EXPECT_TRUE(default_corruption(StakeTable({1}, 0)).empty());
}

TEST(Simnet, NamesRoundTrip) {
  for (auto s : kAllStrategies) EXPECT_EQ(parse_strategy(name(s)), s);
  for (auto p : {PolicyKind::fifo, PolicyKind::random, PolicyKind::starve, PolicyKind::corrupted_first})
    EXPECT_EQ(parse_policy(name(p)), p);
  EXPECT_THROW(parse_strategy("chaos"), std::invalid_argument);
  EXPECT_THROW(parse_policy("lifo"), std::invalid_argument);
}

TEST(Simnet, EveryStrategyKeepsSafetyAndLiveness) {
  for (auto strategy : kAllStrategies) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto sc = scenario({1, 2, 3, 4, 10}, 9, 6, seed);
      sc.d = 3;
      sc.adversary.corrupted = {2, 3, 4};
      sc.adversary.strategy = strategy;
      sc.adversary.max_delay = 4;
      sc.schedule = {PolicyKind::random, 3, 0, 1};
      const auto tr = run(sc);
      EXPECT_TRUE(tr.vouchers_agree) << name(strategy);
      for (const auto& o : tr.outcomes) {
        EXPECT_EQ(o.claimants, 1u) << name(strategy);
        EXPECT_EQ(o.wrong_accepts, 0u) << name(strategy);
      }
      for (std::uint64_t r = 1; r <= 6; ++r) EXPECT_NE(tr.output(5, r), nullptr) << name(strategy);
      if (strategy == Strategy::forge_shares) {
        EXPECT_GT(tr.counts.shares_invalid, 0u);
        EXPECT_GT(tr.counts.malformed, 0u);
      }
      if (strategy == Strategy::replay) {
        EXPECT_GT(tr.counts.shares_duplicate, 0u);
      }
    }
  }
}

TEST(Simnet, EveryDecryptionHasACorrectIssuer) {
  for (auto strategy : kAllStrategies) {
    auto sc = scenario({1, 1, 1, 1, 1}, 2, 4, 8);
    sc.adversary.corrupted = {4, 5};
    sc.adversary.strategy = strategy;
    const auto tr = run(sc);
    std::size_t decs = 0;
    for (const auto& rec : tr.audit->records()) {
      if (rec.event != encdom::AuditEvent::dec) continue;
      ++decs;
      bool correct = false;
      for (auto i : rec.issuers) correct |= !tr.corrupted.contains(i);
      EXPECT_TRUE(correct) << name(strategy);
    }
    EXPECT_GT(decs, 0u);
  }
}

TEST(Simnet, TranscriptJsonlShape) {
  const auto tr = run(scenario({1, 1}, 0, 2));
  const auto text = tr.to_jsonl();
  EXPECT_EQ(text.rfind("{\"", 0), 0u);
  EXPECT_NE(text.find("\"type\":\"scenario\""), std::string::npos);
  EXPECT_NE(text.find("\"type\":\"envelope\""), std::string::npos);
  EXPECT_NE(text.find("\"type\":\"outcome\""), std::string::npos);
  EXPECT_NE(text.find("\"type\":\"audit\""), std::string::npos);
  EXPECT_EQ(text.find("\"event\":\"peek\""), std::string::npos);
}
