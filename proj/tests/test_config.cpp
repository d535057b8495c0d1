#include <gtest/gtest.h>

#include "hsort/config.hpp"

using namespace hsort;
using namespace hsort::config;

namespace {

std::string error_of(const std::string& text, const std::string& source = "s.yaml") {
  try {
    build(parse(text, source));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ParsesFullScenario) {
  const auto cfg = parse(
      "stakes: [1, 2, 3, 4, 10]\n"
      "s_f: 9\n"
      "d: 2\n"
      "rounds: 10\n"
      "seed: 42\n"
      "adversary:\n"
      "  strategy: withhold-shares\n"
      "  corrupted: [1, 2]\n"
      "  max_delay: 3\n"
      "schedule:\n"
      "  policy: starve\n"
      "  victim: 5\n"
      "  ticks: 7\n"
      "attestation: hmac-sha256\n",
      "full.yaml");
  const auto sc = build(cfg);
  EXPECT_EQ(sc.stakes.total(), 20u);
  EXPECT_EQ(sc.stakes.byzantine_bound(), 9u);
  EXPECT_EQ(sc.d, 2u);
  EXPECT_EQ(sc.rounds, 10u);
  EXPECT_EQ(sc.seed, 42u);
  EXPECT_EQ(sc.adversary.strategy, simnet::Strategy::withhold_shares);
  EXPECT_EQ(sc.adversary.corrupted, (std::set<ProcessIndex>{1, 2}));
  EXPECT_EQ(sc.adversary.max_delay, 3u);
  EXPECT_EQ(sc.schedule.kind, simnet::PolicyKind::starve);
  EXPECT_EQ(sc.schedule.victim, 5u);
  EXPECT_EQ(sc.schedule.starve_ticks, 7u);
  EXPECT_EQ(sc.attestation, encdom::AttestationScheme::hmac_sha256);
}

TEST(Config, UnitStakesFromN) {
  const auto sc = build(parse("n: 4\n"));
  EXPECT_EQ(sc.stakes.size(), 4u);
  EXPECT_EQ(sc.stakes.total(), 4u);
  EXPECT_EQ(sc.stakes.byzantine_bound(), 1u);
}

TEST(Config, UnknownKeyReportsLine) {
  const auto msg = error_of("n: 4\nrounds: 2\nroundz: 3\n");
  EXPECT_NE(msg.find("s.yaml:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("roundz"), std::string::npos);
}

TEST(Config, ByzantineBoundViolationNamesLineAndValues) {
  const auto msg = error_of("stakes: [1, 1, 1, 1]\nrounds: 1\ns_f: 2\n");
  EXPECT_EQ(msg, "s.yaml:3: s_f = 2 violates s_f < s_t/2 with s_t = 4");
}

TEST(Config, DExceedingCommitteeSize) {
  const auto msg = error_of("n: 3\nd: 4\n");
  EXPECT_NE(msg.find("s.yaml:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("d = 4 exceeds n = 3"), std::string::npos);
}

TEST(Config, FlagOriginNamedInError) {
  auto cfg = parse("n: 3\n");
  cfg.d = 5;
  cfg.set_from_flag("d", "--d");
  try {
    build(cfg);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.where, "--d");
  }
}

TEST(Config, NAndStakesDisagree) {
  EXPECT_NE(error_of("n: 3\nstakes: [1, 2]\n").find("s.yaml:1"), std::string::npos);
  EXPECT_NE(error_of("rounds: 2\n").find("either n or stakes"), std::string::npos);
  EXPECT_NE(error_of("stakes: [1, 0, 2]\n").find("at least 1"), std::string::npos);
}

TEST(Config, TypeErrors) {
  EXPECT_NE(error_of("n: 4\nrounds: -3\n").find("s.yaml:2"), std::string::npos);
  EXPECT_NE(error_of("n: 4\nseed: abc\n").find("non-negative integer"), std::string::npos);
  EXPECT_NE(error_of("n: 4\nseed: 99999999999999999999999\n").find("64 bits"), std::string::npos);
  EXPECT_NE(error_of("stakes: 3\n").find("list"), std::string::npos);
}

TEST(Config, SyntaxErrorReportsLine) {
  const auto msg = error_of("n: 4\nrounds: 2\nstakes: [1, 2\n");
  EXPECT_NE(msg.find("s.yaml:"), std::string::npos);
  EXPECT_NE(msg.find("YAML syntax error"), std::string::npos);
}

TEST(Config, BadNames) {
  EXPECT_NE(error_of("n: 4\nadversary: chaos\n").find("s.yaml:2"), std::string::npos);
  EXPECT_NE(error_of("n: 4\nschedule: lifo\n").find("s.yaml:2"), std::string::npos);
  EXPECT_NE(error_of("n: 4\nattestation: rsa\n").find("s.yaml:2"), std::string::npos);
  EXPECT_NE(error_of("n: 4\nadversary:\n  tactic: x\n").find("s.yaml:3"), std::string::npos);
}

TEST(Config, CorruptedSetChecked) {
  EXPECT_NE(error_of("n: 4\nadversary:\n  strategy: replay\n  corrupted: [1, 2]\n").find("exceeds s_f"),
            std::string::npos);
  EXPECT_NE(error_of("n: 4\nadversary:\n  strategy: replay\n  corrupted: [5]\n").find("not in 1..4"),
            std::string::npos);
  const auto sc = build(parse("n: 5\nadversary: replay\n"));
  EXPECT_EQ(sc.adversary.corrupted, (std::set<ProcessIndex>{4, 5}));
}

TEST(Config, HashStableUnderFormattingAndSensitiveToValues) {
  const auto a = parse("n: 4\nrounds: 3\n");
  const auto b = parse("rounds: 3\n\nstakes: [1,1,1,1]   # comment\n");
  const auto c = parse("n: 4\nrounds: 4\n");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_EQ(config_hash(a).size(), 64u);
}

TEST(Config, ContributionsOverrideCeremony) {
  const auto sc = build(parse(
      "stakes: [1, 1]\n"
      "s_f: 0\n"
      "contributions:\n"
      "  - issuer: 1\n"
      "    words: [5, 9, 3]\n"
      "  - issuer: 2\n"
      "    words: [9, 5, 3]\n"));
  ASSERT_TRUE(sc.contributions.has_value());
  EXPECT_EQ(sc.contributions->size(), 2u);
  EXPECT_NE(error_of("stakes: [1, 1]\ncontributions:\n  - issuer: 1\n    words: [1]\n").find("expected 3"),
            std::string::npos);
}

TEST(Config, EmptyDocumentUsesDefaultsButNeedsMembers) {
  const auto cfg = parse("");
  EXPECT_EQ(cfg.rounds, 1u);
  EXPECT_THROW(build(cfg), ConfigError);
}
