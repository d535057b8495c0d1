#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsort/encdom.hpp"
#include "hsort/sortition.hpp"

namespace hsort::setup {

using circuits::Word;

struct InsufficientContributionStake : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AccessDenied : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AlreadyDelivered : std::logic_error {
  using std::logic_error::logic_error;
};

/// n ticket words followed by one seed word, proposed by one process.
struct Contribution {
  ProcessIndex issuer = 0;
  std::vector<Word> words;
};

inline Contribution random_contribution(ProcessIndex issuer, std::size_t n, unsigned word_bits, std::mt19937_64& rng) {
  Contribution c{issuer, std::vector<Word>(n + 1)};
  for (auto& w : c.words) w = rng() & circuits::word_mask(word_bits);
  return c;
}

/// Element-wise XOR of all contribution vectors.
inline std::vector<Word> xor_combine(std::span<const Contribution> contributions, std::size_t width) {
  std::vector<Word> out(width, 0);
  for (const auto& c : contributions) {
    if (c.words.size() != width)
      throw circuits::ShapeMismatch("contribution of process " + std::to_string(c.issuer) + " has " +
                                    std::to_string(c.words.size()) + " words, expected " + std::to_string(width));
    for (std::size_t i = 0; i < width; ++i) out[i] ^= c.words[i];
  }
  return out;
}

struct Ceremony;

/// Private delivery channel for plaintext tickets: each ticket goes to its owner once.
class TicketVault {
 public:
  TicketVault() = default;

  Word deliver(ProcessIndex requester, ProcessIndex owner) {
    if (owner == 0 || owner > tickets_.size()) throw std::out_of_range("no ticket for process " + std::to_string(owner));
    if (requester != owner) {
      audit_->append({encdom::AuditEvent::refused, handles_[owner - 1], 0, {requester}, "ticket"});
      throw AccessDenied("process " + std::to_string(requester) + " requested the ticket of process " +
                         std::to_string(owner));
    }
    if (delivered_[owner - 1]) throw AlreadyDelivered("ticket of process " + std::to_string(owner) + " already delivered");
    delivered_[owner - 1] = true;
    audit_->append({encdom::AuditEvent::ticket_release, handles_[owner - 1], 0, {owner}, "ticket"});
    return tickets_[owner - 1];
  }

  std::size_t size() const { return tickets_.size(); }

 private:
  friend Ceremony combine(std::span<const Contribution>, encdom::ThresholdDomain&, std::uint64_t);

  std::vector<Word> tickets_;
  std::vector<encdom::HandleId> handles_;
  std::vector<bool> delivered_;
  std::shared_ptr<encdom::AuditLog> audit_;
};

struct Ceremony {
  sortition::SetupArtifacts artifacts;
  TicketVault vault;
};

/// Combines an agreed contribution set into tickets T and seed q. The combined
/// seed word is encrypted and dropped; tickets stay in the vault for delivery.
inline Ceremony combine(std::span<const Contribution> contributions, encdom::ThresholdDomain& domain,
                        std::uint64_t generation = 0) {
  const auto& stakes = domain.stakes();
  const auto n = stakes.size();
  std::set<ProcessIndex> issuers;
  std::uint64_t stake = 0;
  for (const auto& c : contributions) {
    if (!stakes.contains(c.issuer)) throw std::out_of_range("contribution from unknown process");
    if (!issuers.insert(c.issuer).second)
      throw encdom::DuplicateIssuer("two contributions from process " + std::to_string(c.issuer));
    for (auto w : c.words)
      if (w > domain.max_word()) throw encdom::ValueOutOfRange("contribution word exceeds the word width");
    stake += stakes.stake(c.issuer);
  }
  const auto needed = stakes.total() - stakes.byzantine_bound();
  if (stake < needed)
    throw InsufficientContributionStake("contributors hold " + std::to_string(stake) + " stake, need " +
                                        std::to_string(needed));

  auto combined = xor_combine(contributions, n + 1);
  Ceremony out;
  out.artifacts.generation = generation;
  for (std::size_t i = 0; i < n; ++i) out.artifacts.tickets.push_back(domain.enc(combined[i]));
  out.artifacts.seed = domain.enc(combined[n]);
  out.vault.tickets_.assign(combined.begin(), combined.begin() + static_cast<std::ptrdiff_t>(n));
  for (const auto& t : out.artifacts.tickets) out.vault.handles_.push_back(t.id());
  out.vault.delivered_.assign(n, false);
  out.vault.audit_ = domain.audit_ptr();
  return out;
}

inline Word deliver_ticket(Ceremony& ceremony, ProcessIndex requester, ProcessIndex owner) {
  return ceremony.vault.deliver(requester, owner);
}

}  // namespace hsort::setup
