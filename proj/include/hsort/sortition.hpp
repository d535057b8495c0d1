#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hsort/bytes.hpp"
#include "hsort/circuits.hpp"
#include "hsort/encdom.hpp"
#include "hsort/stake.hpp"

namespace hsort::sortition {

using circuits::CostAccumulator;
using circuits::Wide;
using circuits::Word;
using encdom::CipherHandle;
using encdom::DecryptionShare;
using encdom::Operand;
using encdom::ThresholdDomain;

struct MissingPredecessor : std::logic_error {
  using std::logic_error::logic_error;
};

/// Public result of the setup ceremony: encrypted tickets T and seed q.
struct SetupArtifacts {
  std::vector<CipherHandle> tickets;
  CipherHandle seed;
  std::uint64_t generation = 0;
};

// ---------------------------------------------------------------------------
// Claims. Plaintext operations run by a process on its own ticket.

/// pi = PRF(t_i, r), lambda bits.
inline Bytes claim(Word my_ticket, std::uint64_t round, unsigned lambda = 256) {
  return circuits::prf_proof(my_ticket, round, lambda);
}

/// True iff H(proof || i) equals the voucher.
inline bool verify(ProcessIndex i, std::span<const std::uint8_t> proof, std::span<const std::uint8_t> voucher) {
  if (voucher.empty()) return false;
  const auto expected = circuits::hash_voucher(proof, i, static_cast<unsigned>(voucher.size() * 8));
  return constant_time_equal(expected, voucher);
}

// ---------------------------------------------------------------------------
// Building blocks of one round.

struct PartialSums {
  std::vector<Word> prefix;  // U
  Word unselected = 0;       // m = U[n]
  std::vector<Wide> scaled;  // Z[i] = floor(U[i] * delta / m)
};

/// Prefix sums of S and their scaling onto [0, delta); Z[n] = delta.
inline PartialSums init_permutation(const StakeTable& stakes, Wide delta) {
  PartialSums ps;
  Word running = 0;
  for (auto s : stakes.stakes()) {
    running += s;
    ps.prefix.push_back(running);
  }
  ps.unselected = running;
  for (auto u : ps.prefix) ps.scaled.push_back(Wide{u} * delta / running);
  return ps;
}

struct Election {
  CipherHandle mask;     // L
  CipherHandle elected;  // E
};

/// L = x < Z with plaintext windows (first round of a permutation).
inline Election compare_and_elect(const ThresholdDomain& domain, const CipherHandle& x, std::vector<Wide> windows,
                                  CostAccumulator& cost) {
  Election e;
  e.mask = domain.cmp_lt_plain(x, std::move(windows), cost);
  e.elected = domain.first_one(e.mask, cost);
  return e;
}

/// L = x < U with encrypted partial sums (SLP continuation).
inline Election compare_and_elect(const ThresholdDomain& domain, const CipherHandle& x, const CipherHandle& sums,
                                  CostAccumulator& cost) {
  Election e;
  e.mask = domain.cmp_lt_enc(x, sums, cost);
  e.elected = domain.first_one(e.mask, cost);
  return e;
}

struct LeaderSelection {
  CipherHandle stake;   // s_r
  CipherHandle ticket;  // t_r
  CipherHandle index;   // i_r
  CipherHandle proof;   // pi_r
  CipherHandle voucher; // v_r
};

inline LeaderSelection make_voucher(const ThresholdDomain& domain, const SetupArtifacts& setup,
                                    const CipherHandle& elected, std::uint64_t round, CostAccumulator& cost) {
  const auto& stakes = domain.stakes();
  std::vector<Word> ids(stakes.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i + 1;
  LeaderSelection sel;
  sel.stake = domain.select(Operand::plain(stakes.stakes()), elected, cost);
  sel.ticket = domain.select(Operand(setup.tickets), elected, cost);
  sel.index = domain.select(Operand::plain(ids), elected, cost);
  sel.proof = domain.prf_proof(sel.ticket, round, cost);
  sel.voucher = domain.hash_voucher(sel.proof, sel.index, cost);
  return sel;
}

/// Per-round sortition state of one process.
struct RoundState {
  std::uint64_t round = 0;
  std::uint64_t length = 1;  // d
  std::optional<std::vector<Word>> plain_sums;  // U, first round of a permutation
  CipherHandle sums;                            // U, encrypted in continuation rounds
  CipherHandle unselected;                      // m, encrypted in continuation rounds
  CipherHandle randomness;                      // x as compared against the windows
  CipherHandle mask;                            // L
  CipherHandle elected;                         // E
  LeaderSelection leader;
  std::map<ProcessIndex, DecryptionShare> shares;  // Lambda_r
  std::optional<Bytes> voucher;

  std::uint64_t permutation() const { return (round - 1) / length; }
  bool opens_permutation() const { return (round - 1) % length == 0; }
  const CipherHandle& voucher_handle() const { return leader.voucher; }
};

struct Update {
  CipherHandle sums;        // U'
  CipherHandle unselected;  // m'
  CipherHandle scaled;      // x' in [0, m')
};

/// Removes the previous leader's window and rescales fresh randomness to the remaining stake.
inline Update update_permutation(const ThresholdDomain& domain, const RoundState& previous, const CipherHandle& fresh,
                                 CostAccumulator& cost) {
  Operand sums = previous.plain_sums ? Operand::plain(*previous.plain_sums) : Operand(previous.sums);
  Update u;
  u.sums = domain.sub_masked(previous.leader.stake, std::move(sums), previous.mask, cost);
  u.unselected = domain.project(u.sums, domain.stakes().size() - 1);
  u.scaled = domain.scale(fresh, u.unselected, cost);
  return u;
}

// ---------------------------------------------------------------------------
// Wire format of the protocol's only message.

/// "PVoucher" || be64 round || be64 permutation || share
struct PVoucher {
  static constexpr std::string_view kTag = "PVoucher";

  std::uint64_t round = 0;
  std::uint64_t permutation = 0;
  DecryptionShare share;

  Bytes encode() const {
    Bytes out(kTag.begin(), kTag.end());
    put_be64(out, round);
    put_be64(out, permutation);
    put_bytes(out, share.encode());
    return out;
  }

  static PVoucher decode(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    const auto tag = in.take(kTag.size());
    if (!std::equal(tag.begin(), tag.end(), kTag.begin())) throw std::invalid_argument("not a PVoucher message");
    PVoucher m;
    m.round = in.be64();
    m.permutation = in.be64();
    m.share = DecryptionShare::decode(in);
    if (!in.done()) throw std::invalid_argument("trailing bytes after PVoucher");
    return m;
  }

  friend bool operator==(const PVoucher&, const PVoucher&) = default;
};

enum class ShareVerdict { accepted, invalid, duplicate, buffered };

struct ShareCounters {
  std::uint64_t accepted = 0;
  std::uint64_t invalid = 0;
  std::uint64_t duplicate = 0;
};

/// The per-process state machine: compute the encrypted voucher, collect
/// verified partial decryptions, and decrypt once s_f + 1 stake is reached.
class Engine {
 public:
  Engine(ProcessIndex self, std::shared_ptr<ThresholdDomain> domain, SetupArtifacts setup, encdom::KeyShare key)
      : self_(self), domain_(std::move(domain)), setup_(std::move(setup)), key_(std::move(key)) {
    if (!domain_->stakes().contains(self_)) throw std::invalid_argument("engine index outside the committee");
    if (setup_.tickets.size() != domain_->stakes().size())
      throw std::invalid_argument("setup must provide one ticket per process");
  }

  ProcessIndex self() const { return self_; }
  const ThresholdDomain& domain() const { return *domain_; }
  const SetupArtifacts& setup() const { return setup_; }
  const ShareCounters& counters() const { return counters_; }

  /// x = PRF(q, r).
  CipherHandle derive_randomness(std::uint64_t round, CostAccumulator& cost) const {
    return domain_->prf_word(setup_.seed, round, cost);
  }

  bool has_round(std::uint64_t round) const { return states_.contains(round); }

  bool can_begin(std::uint64_t round, std::uint64_t length) const {
    if (round == 0 || length == 0 || states_.contains(round)) return false;
    return (round - 1) % length == 0 || states_.contains(round - 1);
  }

  const RoundState& begin_round(std::uint64_t round, std::uint64_t length, CostAccumulator& cost) {
    if (round == 0 || length == 0) throw std::invalid_argument("rounds are 1-based and d >= 1");
    if (states_.contains(round)) throw std::logic_error("round " + std::to_string(round) + " already begun");
    RoundState st;
    st.round = round;
    st.length = length;
    auto x = derive_randomness(round, cost);
    Election election;
    if (st.opens_permutation()) {
      auto ps = init_permutation(domain_->stakes(), domain_->delta());
      st.randomness = x;
      election = compare_and_elect(*domain_, x, std::move(ps.scaled), cost);
      st.plain_sums = std::move(ps.prefix);
    } else {
      auto prev = states_.find(round - 1);
      if (prev == states_.end() || prev->second.length != length)
        throw MissingPredecessor("round " + std::to_string(round) + " needs the state of round " +
                                 std::to_string(round - 1));
      auto upd = update_permutation(*domain_, prev->second, x, cost);
      st.sums = upd.sums;
      st.unselected = upd.unselected;
      st.randomness = upd.scaled;
      election = compare_and_elect(*domain_, upd.scaled, upd.sums, cost);
    }
    st.mask = election.mask;
    st.elected = election.elected;
    st.leader = make_voucher(*domain_, setup_, st.elected, round, cost);
    auto& stored = states_.emplace(round, std::move(st)).first->second;

    if (auto pending = pending_.find(round); pending != pending_.end()) {
      auto shares = std::move(pending->second);
      pending_.erase(pending);
      for (const auto& s : shares) on_pvoucher(round, s);
    }
    return stored;
  }

  /// Own partial decryption of v_r, to be sent to every process.
  PVoucher publish(std::uint64_t round) const {
    const auto& st = require(round);
    return {round, st.permutation(), domain_->pdec(self_, key_, st.voucher_handle())};
  }

  ShareVerdict on_pvoucher(std::uint64_t round, const DecryptionShare& share) {
    auto it = states_.find(round);
    if (it == states_.end()) {
      pending_[round].push_back(share);
      return ShareVerdict::buffered;
    }
    auto& st = it->second;
    if (!domain_->ver(share, st.voucher_handle(), share.index)) {
      ++counters_.invalid;
      return ShareVerdict::invalid;
    }
    if (st.shares.contains(share.index)) {
      ++counters_.duplicate;
      return ShareVerdict::duplicate;
    }
    st.shares.emplace(share.index, share);
    ++counters_.accepted;
    return ShareVerdict::accepted;
  }

  std::uint64_t collected_stake(std::uint64_t round) const {
    const auto& st = require(round);
    std::uint64_t sum = 0;
    for (const auto& [j, s] : st.shares) sum += domain_->stakes().stake(j);
    return sum;
  }

  /// Decrypts v_r once the collected shares carry at least s_f + 1 stake.
  std::optional<Bytes> try_decrypt(std::uint64_t round) {
    auto it = states_.find(round);
    if (it == states_.end()) return std::nullopt;
    auto& st = it->second;
    if (st.voucher) return st.voucher;
    if (collected_stake(round) < domain_->stakes().threshold()) return std::nullopt;
    std::vector<DecryptionShare> shares;
    for (const auto& [j, s] : st.shares) shares.push_back(s);
    st.voucher = std::get<Bytes>(domain_->dec(st.voucher_handle(), shares, round));
    return st.voucher;
  }

  const RoundState* state(std::uint64_t round) const {
    auto it = states_.find(round);
    return it == states_.end() ? nullptr : &it->second;
  }

  void forget(std::uint64_t round) {
    states_.erase(round);
    pending_.erase(round);
  }

 private:
  const RoundState& require(std::uint64_t round) const {
    auto it = states_.find(round);
    if (it == states_.end()) throw std::logic_error("round " + std::to_string(round) + " not begun");
    return it->second;
  }

  ProcessIndex self_;
  std::shared_ptr<ThresholdDomain> domain_;
  SetupArtifacts setup_;
  encdom::KeyShare key_;
  std::map<std::uint64_t, RoundState> states_;
  std::map<std::uint64_t, std::vector<DecryptionShare>> pending_;
  ShareCounters counters_;
};

// ---------------------------------------------------------------------------
// Audit-side checks. These read payloads through the logged peek accessor.

struct InvariantCheck {
  bool sums_non_decreasing = true;
  bool mask_monotone = true;
  bool zeros_before_leader = true;
  bool mask_ends_in_one = true;
  bool elected_one_hot = true;
  ProcessIndex leader = 0;

  bool all() const {
    return sums_non_decreasing && mask_monotone && zeros_before_leader && mask_ends_in_one && elected_one_hot;
  }
};

inline InvariantCheck check_invariants(const ThresholdDomain& domain, const RoundState& st) {
  InvariantCheck out;
  std::vector<Word> sums;
  if (st.plain_sums) {
    sums = *st.plain_sums;
  } else {
    sums = std::get<encdom::Words>(domain.peek(st.sums, st.round));
  }
  for (std::size_t i = 1; i < sums.size(); ++i)
    if (sums[i] < sums[i - 1]) out.sums_non_decreasing = false;

  const auto mask = std::get<encdom::Words>(domain.peek(st.mask, st.round));
  const auto elected = std::get<encdom::Words>(domain.peek(st.elected, st.round));
  const auto leader = std::get<encdom::Words>(domain.peek(st.leader.index, st.round)).at(0);
  out.leader = static_cast<ProcessIndex>(leader);
  for (std::size_t i = 1; i < mask.size(); ++i)
    if (mask[i - 1] == 1 && mask[i] != 1) out.mask_monotone = false;
  out.mask_ends_in_one = !mask.empty() && mask.back() == 1;
  std::size_t hot = 0;
  for (auto b : elected) hot += b == 1 ? 1 : (b == 0 ? 0 : 2);
  out.elected_one_hot = hot == 1;
  if (leader == 0 || leader > mask.size()) {
    out.zeros_before_leader = false;
  } else {
    for (std::size_t j = 0; j + 1 < leader; ++j)
      if (mask[j] != 0) out.zeros_before_leader = false;
  }
  return out;
}

/// Violations of the decryption discipline: dec only on C_H outputs, seed never released.
inline std::vector<std::string> decryption_audit(const encdom::AuditLog& log, const SetupArtifacts& setup) {
  std::vector<std::string> problems;
  for (const auto& rec : log.records()) {
    const bool releases = rec.event == encdom::AuditEvent::dec || rec.event == encdom::AuditEvent::ticket_release;
    if (setup.seed.valid() && rec.handle == setup.seed.id() && releases)
      problems.push_back("seed released (" + std::string(encdom::name(rec.event)) + ")");
    if (rec.event == encdom::AuditEvent::dec && rec.origin != circuits::name(circuits::CircuitId::hash))
      problems.push_back("round " + std::to_string(rec.round) + ": dec of a " + rec.origin + " handle " +
                         to_hex(rec.handle));
  }
  return problems;
}

/// Successful decryptions whose issuer set holds no correct process.
inline std::size_t decryptions_without_correct_issuer(const encdom::AuditLog& log,
                                                      const std::set<ProcessIndex>& corrupted) {
  std::size_t bad = 0;
  for (const auto& rec : log.records()) {
    if (rec.event != encdom::AuditEvent::dec) continue;
    bool any_correct = false;
    for (auto j : rec.issuers) any_correct |= !corrupted.contains(j);
    if (!any_correct) ++bad;
  }
  return bad;
}

}  // namespace hsort::sortition
