#pragma once

// Emulated threshold-FHE layer. Payloads are hidden behind CipherHandle and
// can only be released by dec() with enough stake-weighted shares, or by the
// audited peek() accessor. Every release is appended to the AuditLog.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hsort/bytes.hpp"
#include "hsort/circuits.hpp"
#include "hsort/stake.hpp"

namespace hsort::encdom {

using circuits::CircuitId;
using circuits::CostAccumulator;
using circuits::Wide;
using circuits::Word;

using HandleId = std::array<std::uint8_t, 16>;
using Words = std::vector<Word>;
using Plaintext = std::variant<Words, Bytes>;

struct InsufficientStake : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MixedHandles : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DuplicateIssuer : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InvalidShare : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ForeignKeyShare : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ValueOutOfRange : std::out_of_range {
  using std::out_of_range::out_of_range;
};

enum class AttestationScheme : std::uint8_t { ed25519, hmac_sha256 };

inline std::string_view name(AttestationScheme s) { return s == AttestationScheme::ed25519 ? "ed25519" : "hmac"; }

inline AttestationScheme parse_attestation(std::string_view text) {
  if (text == "ed25519") return AttestationScheme::ed25519;
  if (text == "hmac" || text == "hmac-sha256") return AttestationScheme::hmac_sha256;
  throw std::invalid_argument("unknown attestation scheme '" + std::string(text) + "'");
}

/// kappa_i: the private material of one process.
struct KeyShare {
  ProcessIndex index = 0;
  AttestationScheme scheme = AttestationScheme::ed25519;
  Bytes secret;
};

struct PublicKeys {
  Bytes joint_public_key;
  AttestationScheme scheme = AttestationScheme::ed25519;
  /// Indexed by process - 1. For the HMAC scheme these are the MAC keys held by the trusted verifier.
  std::vector<Bytes> verification_keys;
  std::uint64_t threshold_stake = 0;
};

struct KeyMaterial {
  PublicKeys pub;
  std::vector<KeyShare> shares;

  std::uint64_t threshold_stake() const { return pub.threshold_stake; }
  const KeyShare& share(ProcessIndex i) const { return shares.at(i - 1); }
};

/// Emulates the DKG outcome: one key share per committee member, threshold s_f + 1.
inline KeyMaterial keygen(const StakeTable& stakes, AttestationScheme scheme = AttestationScheme::ed25519,
                          std::uint64_t seed = 0) {
  ensure_sodium();
  KeyMaterial km;
  km.pub.scheme = scheme;
  km.pub.threshold_stake = stakes.threshold();
  if (km.pub.threshold_stake > stakes.total() - stakes.byzantine_bound())
    throw InvalidStakeTable("threshold stake exceeds the stake held by correct processes");
  Sha256 joint;
  joint.update("hsort/joint-key").update_be64(seed).update_be64(static_cast<std::uint64_t>(scheme));
  for (std::size_t i = 1; i <= stakes.size(); ++i) {
    const auto material = Sha256{}.update("hsort/keygen").update_be64(seed).update_be64(i).finish();
    KeyShare share{static_cast<ProcessIndex>(i), scheme, {}};
    Bytes verification;
    if (scheme == AttestationScheme::ed25519) {
      share.secret.resize(crypto_sign_SECRETKEYBYTES);
      verification.resize(crypto_sign_PUBLICKEYBYTES);
      crypto_sign_seed_keypair(verification.data(), share.secret.data(), material.data());
    } else {
      share.secret.assign(material.begin(), material.end());
      verification = share.secret;
    }
    joint.update(verification);
    km.pub.verification_keys.push_back(std::move(verification));
    km.shares.push_back(std::move(share));
  }
  const auto jpk = joint.finish();
  km.pub.joint_public_key.assign(jpk.begin(), jpk.end());
  return km;
}

inline Bytes attestation_message(const HandleId& handle, const Digest& digest, ProcessIndex index) {
  Bytes msg;
  const std::string_view tag = "hsort/share";
  msg.insert(msg.end(), tag.begin(), tag.end());
  put_bytes(msg, handle);
  put_bytes(msg, digest);
  put_be16(msg, index);
  return msg;
}

/// Signs (handle, digest, index) with the holder's key. Honest code reaches this only through pdec;
/// adversaries may call it directly to fabricate shares.
inline Bytes attest(const KeyShare& key, const HandleId& handle, const Digest& digest, ProcessIndex index) {
  ensure_sodium();
  const auto msg = attestation_message(handle, digest, index);
  if (key.scheme == AttestationScheme::ed25519) {
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), key.secret.data());
    return sig;
  }
  const auto tag = hmac_sha256(key.secret, msg);
  return Bytes(tag.begin(), tag.end());
}

inline bool check_attestation(AttestationScheme scheme, const Bytes& verification_key, const Bytes& msg,
                              const Bytes& attestation) {
  ensure_sodium();
  if (scheme == AttestationScheme::ed25519) {
    return attestation.size() == crypto_sign_BYTES &&
           crypto_sign_verify_detached(attestation.data(), msg.data(), msg.size(), verification_key.data()) == 0;
  }
  const auto tag = hmac_sha256(verification_key, msg);
  return constant_time_equal(tag, attestation);
}

/// A process's verifiable partial decryption of one handle.
struct DecryptionShare {
  HandleId handle_id{};
  Digest digest{};
  ProcessIndex index = 0;
  Bytes attestation;

  /// handle_id || digest || be16 index || be16 len || attestation
  Bytes encode() const {
    Bytes out;
    put_bytes(out, handle_id);
    put_bytes(out, digest);
    put_be16(out, index);
    put_be16(out, static_cast<std::uint16_t>(attestation.size()));
    put_bytes(out, attestation);
    return out;
  }

  static DecryptionShare decode(ByteReader& in) {
    DecryptionShare s;
    auto id = in.take(s.handle_id.size());
    std::copy(id.begin(), id.end(), s.handle_id.begin());
    auto dg = in.take(s.digest.size());
    std::copy(dg.begin(), dg.end(), s.digest.begin());
    s.index = in.be16();
    auto att = in.take(in.be16());
    s.attestation.assign(att.begin(), att.end());
    return s;
  }

  friend bool operator==(const DecryptionShare&, const DecryptionShare&) = default;
};

struct Node;

/// Opaque encrypted value. The payload is only reachable via ThresholdDomain::dec or ::peek.
class CipherHandle {
 public:
  /// An empty handle; valid() is false until assigned from an enc/eval result.
  CipherHandle() = default;

  bool valid() const { return node_ != nullptr; }
  const HandleId& id() const;
  bool holds_bytes() const;
  /// Public shape: number of words, or bytes for digests.
  std::size_t size() const;
  /// "enc", "project", or the name of the producing circuit.
  std::string origin() const;
  std::optional<CircuitId> circuit() const;

  friend bool operator==(const CipherHandle& a, const CipherHandle& b) { return a.id() == b.id(); }

 private:
  friend class ThresholdDomain;
  explicit CipherHandle(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// A circuit input: either plaintext values or the concatenation of encrypted handles.
struct Operand {
  std::variant<std::vector<Wide>, std::vector<CipherHandle>> value;

  Operand(CipherHandle h) : value(std::vector<CipherHandle>{std::move(h)}) {}
  Operand(std::vector<CipherHandle> hs) : value(std::move(hs)) {}
  Operand(std::vector<Wide> plain) : value(std::move(plain)) {}

  static Operand plain(std::span<const Word> words) { return Operand(std::vector<Wide>(words.begin(), words.end())); }
  static Operand plain(Word w) { return Operand(std::vector<Wide>{w}); }

  bool encrypted() const { return std::holds_alternative<std::vector<CipherHandle>>(value); }
};

struct Node {
  enum class Kind : std::uint8_t { enc, eval, project };
  HandleId id{};
  Plaintext payload;
  Kind kind = Kind::enc;
  CircuitId circuit = CircuitId::lt_plain;
  std::uint32_t option = 0;
  std::vector<Operand> inputs;
};

inline const HandleId& CipherHandle::id() const {
  if (!node_) throw std::logic_error("empty cipher handle");
  return node_->id;
}
inline bool CipherHandle::holds_bytes() const { return std::holds_alternative<Bytes>(node_->payload); }
inline std::size_t CipherHandle::size() const {
  return std::visit([](const auto& v) { return v.size(); }, node_->payload);
}
inline std::optional<CircuitId> CipherHandle::circuit() const {
  if (node_->kind != Node::Kind::eval) return std::nullopt;
  return node_->circuit;
}
inline std::string CipherHandle::origin() const {
  switch (node_->kind) {
    case Node::Kind::enc: return "enc";
    case Node::Kind::project: return "project";
    case Node::Kind::eval: return std::string(circuits::name(node_->circuit));
  }
  return "?";
}

enum class AuditEvent : std::uint8_t { enc, dec, refused, ticket_release, peek };

inline std::string_view name(AuditEvent e) {
  switch (e) {
    case AuditEvent::enc: return "enc";
    case AuditEvent::dec: return "dec";
    case AuditEvent::refused: return "refused";
    case AuditEvent::ticket_release: return "ticket_release";
    case AuditEvent::peek: return "peek";
  }
  return "?";
}

struct AuditRecord {
  AuditEvent event;
  HandleId handle{};
  std::uint64_t round = 0;
  std::vector<ProcessIndex> issuers;
  std::string origin;
};

/// Append-only log of every encryption and every plaintext release.
class AuditLog {
 public:
  void append(AuditRecord record) {
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(record));
  }

  std::vector<AuditRecord> records() const {
    std::lock_guard lock(mutex_);
    return records_;
  }

  std::size_t count(AuditEvent event) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [event](const auto& r) { return r.event == event; }));
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
  }

  /// One JSON object per line: {event, handle_id, round, issuer_set, origin}.
  std::string to_jsonl() const {
    std::lock_guard lock(mutex_);
    std::string out;
    for (const auto& r : records_) {
      nlohmann::json j;
      j["event"] = name(r.event);
      j["handle_id"] = to_hex(r.handle);
      j["round"] = r.round;
      j["issuer_set"] = r.issuers;
      j["origin"] = r.origin;
      out += j.dump();
      out += '\n';
    }
    return out;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<AuditRecord> records_;
};

struct DomainOptions {
  unsigned word_bits = 64;  // beta_x
  unsigned lambda = 256;
};

enum class PrfOutput : std::uint32_t { word = 0, proof = 1 };

class ThresholdDomain {
 public:
  ThresholdDomain(StakeTable stakes, PublicKeys keys, DomainOptions options = {},
                  std::shared_ptr<AuditLog> audit = std::make_shared<AuditLog>())
      : stakes_(std::move(stakes)), keys_(std::move(keys)), options_(options), audit_(std::move(audit)) {
    if (options_.word_bits < 1 || options_.word_bits > 64) throw std::invalid_argument("word_bits must be in [1, 64]");
    if (options_.lambda < 8 || options_.lambda > 256 || options_.lambda % 8 != 0)
      throw std::invalid_argument("lambda must be a multiple of 8 in [8, 256]");
    if (keys_.verification_keys.size() != stakes_.size())
      throw std::invalid_argument("exactly one key share per committee member is required");
    if (Wide{stakes_.total()} >= delta()) throw std::invalid_argument("total stake does not fit the word width");
  }

  const StakeTable& stakes() const { return stakes_; }
  const DomainOptions& options() const { return options_; }
  const PublicKeys& keys() const { return keys_; }
  AuditLog& audit() const { return *audit_; }
  std::shared_ptr<AuditLog> audit_ptr() const { return audit_; }
  Wide delta() const { return Wide{1} << options_.word_bits; }
  Word max_word() const { return circuits::word_mask(options_.word_bits); }

  // ThFHE.Enc ----------------------------------------------------------------

  CipherHandle enc(std::span<const Word> values) {
    for (auto v : values)
      if (v > max_word())
        throw ValueOutOfRange("value " + std::to_string(v) + " exceeds the " + std::to_string(options_.word_bits) +
                              "-bit word width");
    auto node = std::make_shared<Node>();
    node->kind = Node::Kind::enc;
    node->payload = Words(values.begin(), values.end());
    node->id = truncate_id(Sha256{}.update("hsort/enc").update(keys_.joint_public_key).update_be64(next_nonce_++).finish());
    audit_->append({AuditEvent::enc, node->id, 0, {}, "enc"});
    return CipherHandle(std::move(node));
  }

  CipherHandle enc(Word value) { return enc(std::span<const Word>(&value, 1)); }

  // ThFHE.Eval ---------------------------------------------------------------

  CipherHandle eval(CircuitId circuit, std::vector<Operand> inputs, CostAccumulator& cost,
                    std::uint32_t option = 0) const {
    std::vector<Resolved> resolved;
    resolved.reserve(inputs.size());
    for (const auto& op : inputs) resolved.push_back(resolve_stored(op));
    std::uint64_t width = 0;
    auto payload = evaluate(circuit, option, resolved, &width);
    cost.charge(circuit, width);

    auto node = std::make_shared<Node>();
    node->kind = Node::Kind::eval;
    node->circuit = circuit;
    node->option = option;
    node->payload = std::move(payload);
    Sha256 h;
    h.update("hsort/eval").update(keys_.joint_public_key);
    h.update_be64(static_cast<std::uint64_t>(circuit)).update_be64(option);
    for (const auto& op : inputs) hash_operand(h, op);
    node->id = truncate_id(h.finish());
    node->inputs = std::move(inputs);
    return CipherHandle(std::move(node));
  }

  CipherHandle cmp_lt_plain(const CipherHandle& x, std::vector<Wide> ys, CostAccumulator& cost) const {
    return eval(CircuitId::lt_plain, {x, Operand(std::move(ys))}, cost);
  }
  CipherHandle cmp_lt_enc(const CipherHandle& x, const CipherHandle& ys, CostAccumulator& cost) const {
    return eval(CircuitId::lt_enc, {x, ys}, cost);
  }
  CipherHandle first_one(const CipherHandle& bits, CostAccumulator& cost) const {
    return eval(CircuitId::first_one, {bits}, cost);
  }
  CipherHandle select(Operand xs, const CipherHandle& bits, CostAccumulator& cost) const {
    return eval(CircuitId::select, {std::move(xs), bits}, cost);
  }
  CipherHandle prf_word(const CipherHandle& key, Word input, CostAccumulator& cost) const {
    return eval(CircuitId::prf, {key, Operand::plain(input)}, cost, static_cast<std::uint32_t>(PrfOutput::word));
  }
  CipherHandle prf_proof(const CipherHandle& key, Word input, CostAccumulator& cost) const {
    return eval(CircuitId::prf, {key, Operand::plain(input)}, cost, static_cast<std::uint32_t>(PrfOutput::proof));
  }
  CipherHandle hash_voucher(const CipherHandle& proof, const CipherHandle& index, CostAccumulator& cost) const {
    return eval(CircuitId::hash, {proof, index}, cost);
  }
  CipherHandle scale(const CipherHandle& x, const CipherHandle& m, CostAccumulator& cost) const {
    return eval(CircuitId::scale, {x, m}, cost);
  }
  CipherHandle sub_masked(const CipherHandle& y, Operand xs, const CipherHandle& bits, CostAccumulator& cost) const {
    return eval(CircuitId::sub_masked, {y, std::move(xs), bits}, cost);
  }

  /// Slot extraction at a public position; free in the cost model.
  CipherHandle project(const CipherHandle& h, std::size_t position) const {
    const auto& words = std::get_if<Words>(&h.node_->payload);
    if (!words) throw circuits::ShapeMismatch("cannot project a byte payload");
    if (position >= words->size()) throw circuits::ShapeMismatch("projection index out of range");
    auto node = std::make_shared<Node>();
    node->kind = Node::Kind::project;
    node->option = static_cast<std::uint32_t>(position);
    node->payload = Words{(*words)[position]};
    node->inputs.emplace_back(h);
    node->id = truncate_id(Sha256{}
                               .update("hsort/project")
                               .update(keys_.joint_public_key)
                               .update(h.id())
                               .update_be64(position)
                               .finish());
    return CipherHandle(std::move(node));
  }

  // ThFHE.PDec / Ver / Dec ---------------------------------------------------

  DecryptionShare pdec(ProcessIndex caller, const KeyShare& key, const CipherHandle& h) const {
    if (key.index != caller || !stakes_.contains(caller))
      throw ForeignKeyShare("process " + std::to_string(caller) + " presented the key share of process " +
                            std::to_string(key.index));
    DecryptionShare share;
    share.handle_id = h.id();
    share.digest = payload_digest(h.node_->payload);
    share.index = caller;
    share.attestation = attest(key, share.handle_id, share.digest, caller);
    return share;
  }

  bool ver(const DecryptionShare& share, const CipherHandle& h, ProcessIndex j) const {
    if (share.index != j || !stakes_.contains(j) || share.handle_id != h.id()) return false;
    if (share.digest != payload_digest(h.node_->payload)) return false;
    return check_attestation(keys_.scheme, keys_.verification_keys[j - 1],
                             attestation_message(share.handle_id, share.digest, j), share.attestation);
  }

  /// Releases the payload iff the distinct, valid issuers hold at least s_f + 1 stake.
  Plaintext dec(const CipherHandle& target, std::span<const DecryptionShare> shares, std::uint64_t round = 0) {
    std::vector<ProcessIndex> issuers;
    for (const auto& s : shares) {
      if (s.handle_id != target.id()) throw MixedHandles("shares reference more than one handle");
      if (std::find(issuers.begin(), issuers.end(), s.index) != issuers.end())
        throw DuplicateIssuer("two shares from process " + std::to_string(s.index));
      issuers.push_back(s.index);
    }
    for (const auto& s : shares)
      if (!ver(s, target, s.index)) throw InvalidShare("share of process " + std::to_string(s.index) + " is invalid");
    std::sort(issuers.begin(), issuers.end());
    const auto stake = stakes_.stake_of(issuers);
    if (stake < keys_.threshold_stake) {
      audit_->append({AuditEvent::refused, target.id(), round, issuers, target.origin()});
      throw InsufficientStake("issuer stake " + std::to_string(stake) + " below threshold " +
                              std::to_string(keys_.threshold_stake));
    }
    audit_->append({AuditEvent::dec, target.id(), round, std::move(issuers), target.origin()});
    return target.node_->payload;
  }

  /// Audit accessor for harnesses and oracles. Every call is logged as a peek.
  Plaintext peek(const CipherHandle& h, std::uint64_t round = 0) const {
    audit_->append({AuditEvent::peek, h.id(), round, {}, h.origin()});
    return h.node_->payload;
  }

  /// Re-evaluates the provenance DAG from its enc roots and compares every node's stored payload.
  bool provenance_consistent(const CipherHandle& h) const {
    std::map<HandleId, Plaintext> memo;
    return replay(*h.node_, memo).has_value();
  }

 private:
  struct Resolved {
    bool encrypted = false;
    std::vector<Wide> plain;
    Plaintext value;
  };

  static HandleId truncate_id(const Digest& d) {
    HandleId id{};
    std::copy_n(d.begin(), id.size(), id.begin());
    return id;
  }

  /// Keyed so that a share does not let its holder test a guessed plaintext.
  Digest payload_digest(const Plaintext& p) const {
    Bytes msg;
    if (const auto* w = std::get_if<Words>(&p)) {
      put_be64(msg, 0);
      put_be64(msg, w->size());
      for (auto v : *w) put_be64(msg, v);
    } else {
      const auto& b = std::get<Bytes>(p);
      put_be64(msg, 1);
      put_be64(msg, b.size());
      put_bytes(msg, b);
    }
    return hmac_sha256(payload_key_, msg);
  }

  static void hash_operand(Sha256& h, const Operand& op) {
    if (const auto* plain = std::get_if<std::vector<Wide>>(&op.value)) {
      h.update("p").update_be64(plain->size());
      for (auto v : *plain) h.update_be64(static_cast<std::uint64_t>(v >> 64)).update_be64(static_cast<std::uint64_t>(v));
    } else {
      const auto& hs = std::get<std::vector<CipherHandle>>(op.value);
      h.update("e").update_be64(hs.size());
      for (const auto& x : hs) h.update(x.id());
    }
  }

  static Plaintext concat(const std::vector<const Plaintext*>& parts) {
    if (parts.size() == 1) return *parts.front();
    Words out;
    for (const auto* p : parts) {
      const auto* w = std::get_if<Words>(p);
      if (!w) throw circuits::ShapeMismatch("cannot concatenate byte payloads");
      out.insert(out.end(), w->begin(), w->end());
    }
    return out;
  }

  static Resolved resolve_stored(const Operand& op) {
    Resolved r;
    if (const auto* plain = std::get_if<std::vector<Wide>>(&op.value)) {
      r.plain = *plain;
      return r;
    }
    r.encrypted = true;
    std::vector<const Plaintext*> parts;
    for (const auto& h : std::get<std::vector<CipherHandle>>(op.value)) parts.push_back(&h.node_->payload);
    if (parts.empty()) throw circuits::EmptyOperand("encrypted operand without handles");
    r.value = concat(parts);
    return r;
  }

  static Words words_of(const Resolved& r, const char* what) {
    if (!r.encrypted) {
      Words out;
      out.reserve(r.plain.size());
      for (auto v : r.plain) {
        if (v > Wide{~Word{0}}) throw circuits::ShapeMismatch(std::string(what) + ": plaintext exceeds 64 bits");
        out.push_back(static_cast<Word>(v));
      }
      return out;
    }
    const auto* w = std::get_if<Words>(&r.value);
    if (!w) throw circuits::ShapeMismatch(std::string(what) + ": expected words, got bytes");
    return *w;
  }

  static Word scalar_of(const Resolved& r, const char* what) {
    auto w = words_of(r, what);
    if (w.size() != 1) throw circuits::ShapeMismatch(std::string(what) + ": expected a scalar");
    return w.front();
  }

  static void require_encrypted(const Resolved& r, const char* what) {
    if (!r.encrypted) throw circuits::ShapeMismatch(std::string(what) + " must be encrypted");
  }

  Plaintext evaluate(CircuitId circuit, std::uint32_t option, const std::vector<Resolved>& in,
                     std::uint64_t* width) const {
    auto arity = [&](std::size_t expected) {
      if (in.size() != expected)
        throw circuits::ShapeMismatch(std::string(circuits::name(circuit)) + " takes " + std::to_string(expected) +
                                      " operands, got " + std::to_string(in.size()));
    };
    switch (circuit) {
      case CircuitId::lt_plain: {
        arity(2);
        require_encrypted(in[0], "C_< scalar");
        if (in[1].encrypted) throw circuits::ShapeMismatch("C_< compares against plaintext; use C_<=");
        *width = in[1].plain.size();
        return circuits::cmp_lt(scalar_of(in[0], "C_<"), std::span<const Wide>(in[1].plain));
      }
      case CircuitId::lt_enc: {
        arity(2);
        require_encrypted(in[0], "C_<= scalar");
        require_encrypted(in[1], "C_<= vector");
        auto ys = words_of(in[1], "C_<=");
        *width = ys.size();
        return circuits::cmp_lt(scalar_of(in[0], "C_<="), std::span<const Word>(ys));
      }
      case CircuitId::first_one: {
        arity(1);
        require_encrypted(in[0], "C_01 input");
        auto bits = words_of(in[0], "C_01");
        *width = bits.size();
        return circuits::first_one(bits);
      }
      case CircuitId::select: {
        arity(2);
        require_encrypted(in[1], "C_Sel mask");
        auto xs = words_of(in[0], "C_Sel");
        auto bits = words_of(in[1], "C_Sel");
        *width = xs.size();
        return Words{circuits::select(xs, bits)};
      }
      case CircuitId::prf: {
        arity(2);
        require_encrypted(in[0], "C_PRF key");
        if (in[1].encrypted) throw circuits::ShapeMismatch("C_PRF input must be plaintext");
        const auto key = scalar_of(in[0], "C_PRF");
        const auto x = scalar_of(in[1], "C_PRF");
        *width = 1;
        if (option == static_cast<std::uint32_t>(PrfOutput::proof)) return circuits::prf_proof(key, x, options_.lambda);
        if (option != static_cast<std::uint32_t>(PrfOutput::word)) throw circuits::ShapeMismatch("unknown C_PRF mode");
        return Words{circuits::prf_word(key, x, options_.word_bits)};
      }
      case CircuitId::hash: {
        arity(2);
        require_encrypted(in[0], "C_H proof");
        const auto* proof = std::get_if<Bytes>(&in[0].value);
        if (!proof) throw circuits::ShapeMismatch("C_H expects a byte-string proof");
        *width = 1;
        return circuits::hash_voucher(*proof, scalar_of(in[1], "C_H"), options_.lambda);
      }
      case CircuitId::scale: {
        arity(2);
        require_encrypted(in[0], "C_scale input");
        *width = 1;
        return Words{circuits::scale(scalar_of(in[0], "C_scale"), scalar_of(in[1], "C_scale"), options_.word_bits)};
      }
      case CircuitId::sub_masked: {
        arity(3);
        require_encrypted(in[2], "C_- mask");
        auto xs = words_of(in[1], "C_-");
        auto bits = words_of(in[2], "C_-");
        *width = xs.size();
        return circuits::sub_masked(scalar_of(in[0], "C_-"), xs, bits);
      }
    }
    throw circuits::UnknownCircuit("unknown circuit");
  }

  std::optional<Plaintext> replay(const Node& node, std::map<HandleId, Plaintext>& memo) const {
    if (auto it = memo.find(node.id); it != memo.end()) return it->second;
    std::optional<Plaintext> value;
    if (node.kind == Node::Kind::enc) {
      value = node.payload;
    } else {
      std::vector<Resolved> resolved;
      for (const auto& op : node.inputs) {
        Resolved r;
        if (const auto* plain = std::get_if<std::vector<Wide>>(&op.value)) {
          r.plain = *plain;
        } else {
          r.encrypted = true;
          std::vector<Plaintext> parts;
          for (const auto& h : std::get<std::vector<CipherHandle>>(op.value)) {
            auto sub = replay(*h.node_, memo);
            if (!sub) return std::nullopt;
            parts.push_back(std::move(*sub));
          }
          std::vector<const Plaintext*> ptrs;
          for (const auto& p : parts) ptrs.push_back(&p);
          r.value = concat(ptrs);
        }
        resolved.push_back(std::move(r));
      }
      if (node.kind == Node::Kind::project) {
        const auto words = words_of(resolved.at(0), "project");
        value = Words{words.at(node.option)};
      } else {
        std::uint64_t width = 0;
        value = evaluate(node.circuit, node.option, resolved, &width);
      }
    }
    if (*value != node.payload) return std::nullopt;
    memo.emplace(node.id, *value);
    return value;
  }

  StakeTable stakes_;
  PublicKeys keys_;
  DomainOptions options_;
  std::shared_ptr<AuditLog> audit_;
  std::uint64_t next_nonce_ = 0;
  Bytes payload_key_ = fresh_payload_key();

  static Bytes fresh_payload_key() {
    ensure_sodium();
    Bytes key(32);
    randombytes_buf(key.data(), key.size());
    return key;
  }
};

}  // namespace hsort::encdom
