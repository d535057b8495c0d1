#include <gtest/gtest.h>

#include <random>

#include "hsort/experiment.hpp"
#include "hsort/setup.hpp"

using namespace hsort;
using namespace hsort::setup;
using encdom::AuditEvent;
using encdom::Words;

namespace {

struct Fixture {
  explicit Fixture(std::vector<std::uint64_t> stakes, std::uint64_t s_f, unsigned word_bits = 64)
      : table(std::move(stakes), s_f),
        keys(encdom::keygen(table, encdom::AttestationScheme::hmac_sha256)),
        domain(table, keys.pub, encdom::DomainOptions{word_bits, 256}) {}

  StakeTable table;
  encdom::KeyMaterial keys;
  encdom::ThresholdDomain domain;
};

Words words(const encdom::ThresholdDomain& d, const encdom::CipherHandle& h) { return std::get<Words>(d.peek(h)); }

}  // namespace

TEST(XorCombine, WorkedExample) {
  const std::vector<Contribution> cs{{1, {5, 9, 3}}, {2, {9, 5, 3}}};
  EXPECT_EQ(xor_combine(cs, 3), (std::vector<Word>{12, 12, 0}));
}

TEST(XorCombine, WidthMismatch) {
  const std::vector<Contribution> cs{{1, {5, 9, 3}}, {2, {9, 5}}};
  EXPECT_THROW(xor_combine(cs, 3), circuits::ShapeMismatch);
}

TEST(Combine, TicketsAndSeedFromContributions) {
  Fixture f({1, 1}, 0);
  const std::vector<Contribution> cs{{1, {5, 9, 3}}, {2, {9, 5, 3}}};
  auto c = combine(cs, f.domain, 4);
  ASSERT_EQ(c.artifacts.tickets.size(), 2u);
  EXPECT_EQ(words(f.domain, c.artifacts.tickets[0]), Words{12});
  EXPECT_EQ(words(f.domain, c.artifacts.tickets[1]), Words{12});
  EXPECT_EQ(words(f.domain, c.artifacts.seed), Words{0});
  EXPECT_EQ(c.artifacts.generation, 4u);
}

TEST(Combine, InsufficientStake) {
  Fixture f({1, 2, 3, 4}, 4);  // s_t - s_f = 6
  std::mt19937_64 rng(1);
  const std::vector<Contribution> five{random_contribution(1, 4, 64, rng), random_contribution(4, 4, 64, rng)};
  EXPECT_THROW(combine(five, f.domain), InsufficientContributionStake);
  const std::vector<Contribution> six{random_contribution(2, 4, 64, rng), random_contribution(4, 4, 64, rng)};
  EXPECT_NO_THROW(combine(six, f.domain));
}

TEST(Combine, DuplicateIssuerAndUnknownProcess) {
  Fixture f({1, 1, 1}, 1);
  std::mt19937_64 rng(2);
  const std::vector<Contribution> dup{random_contribution(1, 3, 64, rng), random_contribution(1, 3, 64, rng)};
  EXPECT_THROW(combine(dup, f.domain), encdom::DuplicateIssuer);
  const std::vector<Contribution> unknown{random_contribution(1, 3, 64, rng), random_contribution(4, 3, 64, rng)};
  EXPECT_THROW(combine(unknown, f.domain), std::out_of_range);
}

TEST(Combine, WordWidthEnforced) {
  Fixture f({1, 1}, 0, 4);
  const std::vector<Contribution> cs{{1, {16, 0, 0}}, {2, {0, 0, 0}}};
  EXPECT_THROW(combine(cs, f.domain), encdom::ValueOutOfRange);
}

TEST(Combine, OneHonestContributorGivesEveryOutputExactlyOnce) {
  // Fixed hostile words XOR a bijection over the honest word.
  Fixture f({1, 1, 1}, 1, 4);
  for (Word hostile = 0; hostile < 16; ++hostile) {
    std::vector<int> seen(16, 0);
    for (Word honest = 0; honest < 16; ++honest) {
      const std::vector<Contribution> cs{{1, {honest, honest, honest, honest}}, {3, {hostile, 7, 0, hostile}}};
      ++seen[xor_combine(cs, 4)[0]];
    }
    for (int s : seen) EXPECT_EQ(s, 1);
  }
}

TEST(Combine, OneHonestContributorUniformAtToyWidth) {
  Fixture f({1, 1, 1}, 1, 4);
  std::mt19937_64 rng(3);
  std::vector<std::uint64_t> ticket(16, 0), seed(16, 0);
  for (int ceremony = 0; ceremony < 10000; ++ceremony) {
    const std::vector<Contribution> cs{random_contribution(1, 3, 4, rng), {2, {0, 0, 0, 0}}, {3, {15, 15, 15, 15}}};
    const auto w = xor_combine(cs, 4);
    ++ticket[w[0]];
    ++seed[w[3]];
  }
  const std::vector<double> p(16, 1.0 / 16);
  EXPECT_GT(experiment::chi_square(ticket, p).p_value, 0.001);
  EXPECT_GT(experiment::chi_square(seed, p).p_value, 0.001);
}

TEST(DeliverTicket, OwnerReceivesEncryptedValue) {
  Fixture f({1, 2, 3}, 2);
  std::mt19937_64 rng(4);
  const std::vector<Contribution> cs{random_contribution(1, 3, 64, rng), random_contribution(2, 3, 64, rng),
                                     random_contribution(3, 3, 64, rng)};
  auto c = combine(cs, f.domain);
  for (ProcessIndex i = 1; i <= 3; ++i)
    EXPECT_EQ(deliver_ticket(c, i, i), words(f.domain, c.artifacts.tickets[i - 1])[0]);
}

TEST(DeliverTicket, NonOwnerRefusedAndAudited) {
  Fixture f({1, 1, 1}, 1);
  std::mt19937_64 rng(5);
  const std::vector<Contribution> cs{random_contribution(1, 3, 64, rng), random_contribution(2, 3, 64, rng)};
  auto c = combine(cs, f.domain);
  EXPECT_THROW(deliver_ticket(c, 2, 1), AccessDenied);
  EXPECT_EQ(f.domain.audit().count(AuditEvent::refused), 1u);
  EXPECT_EQ(f.domain.audit().count(AuditEvent::ticket_release), 0u);
  EXPECT_THROW(deliver_ticket(c, 1, 4), std::out_of_range);
}

TEST(DeliverTicket, ExactlyOncePerOwnerAndSeedNeverReleased) {
  Fixture f({1, 1, 1, 1}, 1);
  std::mt19937_64 rng(6);
  std::vector<Contribution> cs;
  for (ProcessIndex i = 1; i <= 4; ++i) cs.push_back(random_contribution(i, 4, 64, rng));
  auto c = combine(cs, f.domain);
  for (ProcessIndex i = 1; i <= 4; ++i) deliver_ticket(c, i, i);
  EXPECT_THROW(deliver_ticket(c, 3, 3), AlreadyDelivered);
  EXPECT_EQ(f.domain.audit().count(AuditEvent::ticket_release), 4u);
  std::size_t seed_releases = 0;
  for (const auto& rec : f.domain.audit().records())
    if ((rec.event == AuditEvent::dec || rec.event == AuditEvent::ticket_release) && rec.handle == c.artifacts.seed.id())
      ++seed_releases;
  EXPECT_EQ(seed_releases, 0u);
}

TEST(Combine, FreshGenerationGivesFreshTickets) {
  Fixture f({1, 1}, 0);
  std::mt19937_64 rng(7);
  const std::vector<Contribution> g0{random_contribution(1, 2, 64, rng), random_contribution(2, 2, 64, rng)};
  const std::vector<Contribution> g1{random_contribution(1, 2, 64, rng), random_contribution(2, 2, 64, rng)};
  auto a = combine(g0, f.domain, 0);
  auto b = combine(g1, f.domain, 1);
  EXPECT_NE(deliver_ticket(a, 1, 1), deliver_ticket(b, 1, 1));
  EXPECT_EQ(b.artifacts.generation, 1u);
}
