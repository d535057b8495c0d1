#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hsort/bytes.hpp"
#include "hsort/stake.hpp"

namespace hsort::circuits {

using Word = std::uint64_t;
__extension__ typedef unsigned __int128 Wide;

struct ShapeMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmptyOperand : ShapeMismatch {
  using ShapeMismatch::ShapeMismatch;
};

struct UnknownCircuit : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// The eight public circuits evaluated over encrypted data.
enum class CircuitId : std::uint8_t {
  lt_plain = 0,    // C_<   encrypted scalar vs plaintext vector
  first_one = 1,   // C_01
  select = 2,      // C_Sel
  prf = 3,         // C_PRF
  hash = 4,        // C_H
  lt_enc = 5,      // C_<=  encrypted scalar vs encrypted vector (strict <)
  scale = 6,       // C_scale
  sub_masked = 7,  // C_-
};

inline constexpr std::array kAllCircuits{CircuitId::lt_plain, CircuitId::first_one, CircuitId::select,
                                         CircuitId::prf,      CircuitId::hash,      CircuitId::lt_enc,
                                         CircuitId::scale,    CircuitId::sub_masked};

constexpr std::string_view name(CircuitId id) {
  switch (id) {
    case CircuitId::lt_plain: return "C_<";
    case CircuitId::first_one: return "C_01";
    case CircuitId::select: return "C_Sel";
    case CircuitId::prf: return "C_PRF";
    case CircuitId::hash: return "C_H";
    case CircuitId::lt_enc: return "C_<=";
    case CircuitId::scale: return "C_scale";
    case CircuitId::sub_masked: return "C_-";
  }
  return "?";
}

inline CircuitId circuit_from_code(std::uint8_t code) {
  if (code >= kAllCircuits.size()) throw UnknownCircuit("unknown circuit code " + std::to_string(code));
  return static_cast<CircuitId>(code);
}

inline CircuitId parse_circuit(std::string_view text) {
  for (auto id : kAllCircuits)
    if (name(id) == text) return id;
  throw UnknownCircuit("unknown circuit '" + std::string(text) + "'");
}

/// Word and digest widths shared by every circuit evaluation.
struct CircuitConfig {
  unsigned beta_x = 64;      // bits of the random word, delta = 2^beta_x
  unsigned beta_m = 16;      // bits needed for the largest m (total stake)
  unsigned lambda = 256;     // hash / proof output bits
  unsigned beta_cost = 256;  // size of one encrypted bit, for communication accounting

  Wide delta() const { return Wide{1} << beta_x; }

  void validate() const {
    if (beta_x < 1 || beta_x > 64) throw std::invalid_argument("beta_x must be in [1, 64]");
    if (beta_m >= beta_x) throw std::invalid_argument("beta_m must be smaller than beta_x (delta >> m)");
    if (lambda < 8 || lambda > 256 || lambda % 8 != 0)
      throw std::invalid_argument("lambda must be a multiple of 8 in [8, 256]");
    if (beta_cost == 0) throw std::invalid_argument("beta_cost must be positive");
  }

  static CircuitConfig for_total(std::uint64_t stake_total, unsigned beta_x = 64, unsigned lambda = 256) {
    CircuitConfig cfg;
    cfg.beta_x = beta_x;
    cfg.beta_m = static_cast<unsigned>(std::bit_width(stake_total));
    cfg.lambda = lambda;
    return cfg;
  }

  static CircuitConfig for_stakes(const StakeTable& stakes, unsigned beta_x = 64, unsigned lambda = 256) {
    return for_total(stakes.total(), beta_x, lambda);
  }
};

inline Word word_mask(unsigned bits) { return bits >= 64 ? ~Word{0} : (Word{1} << bits) - 1; }

// ---------------------------------------------------------------------------
// Reference semantics. These are the plaintext meanings of each circuit; the
// encrypted domain evaluates them on hidden payloads.

/// C_< and C_<=: out[i] = 1 iff x < ys[i].
inline std::vector<Word> cmp_lt(Word x, std::span<const Wide> ys) {
  if (ys.empty()) throw EmptyOperand("comparison against an empty vector");
  std::vector<Word> out(ys.size());
  std::transform(ys.begin(), ys.end(), out.begin(), [x](Wide y) { return Wide{x} < y ? Word{1} : Word{0}; });
  return out;
}

inline std::vector<Word> cmp_lt(Word x, std::span<const Word> ys) {
  std::vector<Wide> wide(ys.begin(), ys.end());
  return cmp_lt(x, wide);
}

/// C_01: B & ~(B >> 1), i.e. a 1 only at the 0 -> 1 transition of a monotone bit vector.
inline std::vector<Word> first_one(std::span<const Word> bits) {
  std::vector<Word> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const Word prev = i == 0 ? 0 : (bits[i - 1] & 1);
    out[i] = (bits[i] & 1) & (prev ^ 1);
  }
  return out;
}

/// C_Sel: dot product X . B; with one-hot B this is the hot element.
inline Word select(std::span<const Word> xs, std::span<const Word> bits) {
  if (xs.size() != bits.size())
    throw ShapeMismatch("select: |X|=" + std::to_string(xs.size()) + " but |B|=" + std::to_string(bits.size()));
  Word acc = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) acc += xs[i] * bits[i];
  return acc;
}

/// Keyed PRF block: HMAC-SHA256(be64(key), be64(input)).
inline Digest prf_block(Word key, Word input) {
  Bytes k, m;
  put_be64(k, key);
  put_be64(m, input);
  return hmac_sha256(k, m);
}

/// C_PRF with a word output in [0, 2^beta_x).
inline Word prf_word(Word key, Word input, unsigned beta_x) {
  const auto block = prf_block(key, input);
  return read_be64(block) >> (64 - beta_x);
}

/// C_PRF with a lambda-bit output, used for leader proofs.
inline Bytes prf_proof(Word key, Word input, unsigned lambda) {
  const auto block = prf_block(key, input);
  return Bytes(block.begin(), block.begin() + lambda / 8);
}

/// C_H: SHA-256 truncated to lambda bits.
inline Bytes hash(std::span<const std::uint8_t> input, unsigned lambda) {
  const auto digest = sha256(input);
  return Bytes(digest.begin(), digest.begin() + lambda / 8);
}

/// Encoding of pi || i: the proof followed by the index as 16-bit big endian.
inline Bytes voucher_preimage(std::span<const std::uint8_t> proof, Word index) {
  if (index > 0xffff) throw ShapeMismatch("voucher index does not fit 16 bits");
  Bytes out(proof.begin(), proof.end());
  put_be16(out, static_cast<std::uint16_t>(index));
  return out;
}

inline Bytes hash_voucher(std::span<const std::uint8_t> proof, Word index, unsigned lambda) {
  return hash(voucher_preimage(proof, index), lambda);
}

/// C_scale: floor(x * m / 2^beta_x).
inline Word scale(Word x, Word m, unsigned beta_x) {
  if (m == 0) throw std::invalid_argument("scale: m must be positive");
  if (beta_x < 64 && x >> beta_x) throw std::out_of_range("scale: x exceeds the word width");
  return static_cast<Word>((Wide{x} * m) >> beta_x);
}

/// C_-: out[i] = xs[i] - y * bits[i].
inline std::vector<Word> sub_masked(Word y, std::span<const Word> xs, std::span<const Word> bits) {
  if (xs.size() != bits.size())
    throw ShapeMismatch("sub_masked: |X|=" + std::to_string(xs.size()) + " but |B|=" + std::to_string(bits.size()));
  std::vector<Word> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] - y * bits[i];
  return out;
}

// ---------------------------------------------------------------------------
// Cost model. Binary-circuit gate counts with unit constant factors, and
// arithmetic-circuit multiplicative depths.

inline constexpr std::uint64_t kCipherAndGates = 4218;

/// ceil(log2 v); 0 for v <= 1.
constexpr std::uint64_t ceil_log2(std::uint64_t v) { return v <= 1 ? 0 : std::bit_width(v - 1); }

constexpr std::uint64_t gate_count(CircuitId id, std::uint64_t n, std::uint64_t stake_total) {
  const std::uint64_t log_st = ceil_log2(stake_total);
  switch (id) {
    case CircuitId::lt_plain:
    case CircuitId::lt_enc: return n * log_st;
    case CircuitId::first_one:
    case CircuitId::sub_masked: return n;
    case CircuitId::select: return n * n;
    case CircuitId::prf:
    case CircuitId::hash: return kCipherAndGates;
    case CircuitId::scale: return log_st * log_st;
  }
  return 0;
}

constexpr std::string_view gate_formula(CircuitId id) {
  switch (id) {
    case CircuitId::lt_plain: return "O(n log s_t)";
    case CircuitId::lt_enc: return "O(n log s_t)";
    case CircuitId::first_one: return "O(n)";
    case CircuitId::select: return "O(n^2)";
    case CircuitId::prf:
    case CircuitId::hash: return "4218 (AND gates only)";
    case CircuitId::scale: return "O((log s_t)^2)";
    case CircuitId::sub_masked: return "O(n)";
  }
  return "?";
}

/// Multiplicative depth in the arithmetic model; nullopt where no arithmetic circuit is known (C_scale).
constexpr std::optional<std::uint64_t> arithmetic_depth(CircuitId id, std::uint64_t n, std::uint64_t stake_total) {
  switch (id) {
    case CircuitId::lt_plain: return 2;
    case CircuitId::first_one: return 1;
    case CircuitId::select: return 1;
    case CircuitId::prf:
    case CircuitId::hash: return 6;
    case CircuitId::lt_enc: return ceil_log2(n * std::max<std::uint64_t>(1, ceil_log2(stake_total)));
    case CircuitId::scale: return std::nullopt;
    case CircuitId::sub_masked: return 1;
  }
  return std::nullopt;
}

/// Per-circuit invocation counters. Passed explicitly by whoever evaluates circuits.
class CostAccumulator {
 public:
  explicit CostAccumulator(std::uint64_t stake_total = 1) : stake_total_(stake_total) {}

  void charge(CircuitId id, std::uint64_t n) {
    auto& row = rows_[static_cast<std::size_t>(id)];
    ++row.invocations;
    row.gates += gate_count(id, n, stake_total_);
  }

  std::uint64_t invocations(CircuitId id) const { return rows_[static_cast<std::size_t>(id)].invocations; }
  std::uint64_t gates(CircuitId id) const { return rows_[static_cast<std::size_t>(id)].gates; }
  std::uint64_t total_gates() const {
    std::uint64_t sum = 0;
    for (const auto& r : rows_) sum += r.gates;
    return sum;
  }
  std::uint64_t total_invocations() const {
    std::uint64_t sum = 0;
    for (const auto& r : rows_) sum += r.invocations;
    return sum;
  }
  std::uint64_t stake_total() const { return stake_total_; }

  CostAccumulator& operator+=(const CostAccumulator& other) {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      rows_[i].invocations += other.rows_[i].invocations;
      rows_[i].gates += other.rows_[i].gates;
    }
    return *this;
  }

  friend bool operator==(const CostAccumulator& a, const CostAccumulator& b) {
    for (std::size_t i = 0; i < a.rows_.size(); ++i)
      if (a.rows_[i].invocations != b.rows_[i].invocations || a.rows_[i].gates != b.rows_[i].gates) return false;
    return true;
  }

 private:
  struct Row {
    std::uint64_t invocations = 0;
    std::uint64_t gates = 0;
  };
  std::uint64_t stake_total_;
  std::array<Row, kAllCircuits.size()> rows_{};
};

/// Invocations of each circuit in one round of the protocol.
struct RoundProfile {
  std::array<std::uint64_t, kAllCircuits.size()> calls{};
  /// Circuits on the multiplicative critical path from the round randomness to the voucher.
  std::vector<CircuitId> depth_path;

  std::uint64_t operator[](CircuitId id) const { return calls[static_cast<std::size_t>(id)]; }
};

inline RoundProfile ssle_round_profile() {
  RoundProfile p;
  p.calls[static_cast<std::size_t>(CircuitId::prf)] = 2;  // x and pi_r
  p.calls[static_cast<std::size_t>(CircuitId::lt_plain)] = 1;
  p.calls[static_cast<std::size_t>(CircuitId::first_one)] = 1;
  p.calls[static_cast<std::size_t>(CircuitId::select)] = 3;  // s_r, t_r, i_r
  p.calls[static_cast<std::size_t>(CircuitId::hash)] = 1;
  p.depth_path = {CircuitId::lt_plain, CircuitId::first_one, CircuitId::select, CircuitId::prf, CircuitId::hash};
  return p;
}

inline RoundProfile slp_continuation_profile() {
  RoundProfile p;
  p.calls[static_cast<std::size_t>(CircuitId::prf)] = 2;
  p.calls[static_cast<std::size_t>(CircuitId::sub_masked)] = 1;
  p.calls[static_cast<std::size_t>(CircuitId::scale)] = 1;
  p.calls[static_cast<std::size_t>(CircuitId::lt_enc)] = 1;
  p.calls[static_cast<std::size_t>(CircuitId::first_one)] = 1;
  p.calls[static_cast<std::size_t>(CircuitId::select)] = 3;
  p.calls[static_cast<std::size_t>(CircuitId::hash)] = 1;
  p.depth_path = {CircuitId::sub_masked, CircuitId::scale,  CircuitId::lt_enc, CircuitId::first_one,
                  CircuitId::select,     CircuitId::prf,    CircuitId::hash};
  return p;
}

struct CostRow {
  CircuitId circuit;
  std::string_view formula;
  std::uint64_t gates;                  // at (n, s_t)
  std::optional<std::uint64_t> depth;   // arithmetic model
  std::uint64_t ssle_calls;
  std::uint64_t slp_calls;
};

struct RoundCost {
  std::uint64_t gates = 0;
  std::uint64_t cipher_gates = 0;  // C_PRF and C_H, independent of n
  std::optional<std::uint64_t> depth;

  std::uint64_t data_dependent_gates() const { return gates - cipher_gates; }
};

struct CostReport {
  std::uint64_t n = 0;
  std::uint64_t stake_total = 0;
  CircuitConfig config;
  std::vector<CostRow> rows;
  RoundCost ssle_round;
  RoundCost slp_round;  // a continuation round of a permutation
  std::uint64_t messages_per_round = 0;
  std::uint64_t share_bits = 0;
  std::uint64_t round_bits = 0;

  std::string to_text() const;
};

inline RoundCost evaluate_round(const RoundProfile& profile, std::uint64_t n, std::uint64_t stake_total) {
  RoundCost cost;
  for (auto id : kAllCircuits) {
    const auto g = profile[id] * gate_count(id, n, stake_total);
    cost.gates += g;
    if (id == CircuitId::prf || id == CircuitId::hash) cost.cipher_gates += g;
  }
  std::uint64_t depth = 0;
  for (auto id : profile.depth_path) {
    const auto d = arithmetic_depth(id, n, stake_total);
    if (!d) return cost;
    depth += *d;
  }
  cost.depth = depth;
  return cost;
}

inline CostReport cost_report(std::uint64_t n, std::uint64_t stake_total, const CircuitConfig& config) {
  CostReport report;
  report.n = n;
  report.stake_total = stake_total;
  report.config = config;
  const auto ssle = ssle_round_profile();
  const auto slp = slp_continuation_profile();
  for (auto id : kAllCircuits)
    report.rows.push_back({id, gate_formula(id), gate_count(id, n, stake_total), arithmetic_depth(id, n, stake_total),
                           ssle[id], slp[id]});
  report.ssle_round = evaluate_round(ssle, n, stake_total);
  report.slp_round = evaluate_round(slp, n, stake_total);
  report.messages_per_round = n * (n - (n > 0 ? 1 : 0));
  report.share_bits = std::uint64_t{config.lambda} * config.beta_cost;
  report.round_bits = report.messages_per_round * report.share_bits;
  return report;
}

inline std::string CostReport::to_text() const {
  std::ostringstream os;
  auto depth_text = [](const std::optional<std::uint64_t>& d) { return d ? std::to_string(*d) : std::string("unavailable"); };
  os << "# circuit cost model  n=" << n << "  s_t=" << stake_total << "  lambda=" << config.lambda
     << "  beta_cost=" << config.beta_cost << "\n";
  os << std::left << std::setw(9) << "circuit" << std::setw(24) << "gates (binary model)" << std::setw(14)
     << "gates@(n,s_t)" << std::setw(14) << "depth (BGV)" << std::setw(11) << "per SSLE" << "per SLP\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(9) << name(r.circuit) << std::setw(24) << r.formula << std::setw(14) << r.gates
       << std::setw(14) << depth_text(r.depth) << std::setw(11) << r.ssle_calls << r.slp_calls << "\n";
  }
  os << "ssle_round_gates " << ssle_round.gates << "\n";
  os << "ssle_round_depth " << depth_text(ssle_round.depth) << "\n";
  os << "slp_round_gates " << slp_round.gates << "\n";
  os << "slp_round_depth " << depth_text(slp_round.depth) << "\n";
  os << "messages_per_round " << messages_per_round << "\n";
  os << "share_bits " << share_bits << "\n";
  os << "round_bits " << round_bits << "\n";
  return os.str();
}

}  // namespace hsort::circuits
