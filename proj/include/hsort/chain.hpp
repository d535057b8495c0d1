#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "hsort/bytes.hpp"
#include "hsort/sortition.hpp"

namespace hsort::chain {

using circuits::Word;

/// "Proposal" || be64 round || be16 proposer || be16 |proof| || proof || be32 |payload| || payload
struct BlockProposal {
  static constexpr std::string_view kTag = "Proposal";

  std::uint64_t round = 0;
  ProcessIndex proposer = 0;
  Bytes proof;
  Bytes payload;

  Bytes encode() const {
    Bytes out(kTag.begin(), kTag.end());
    put_be64(out, round);
    put_be16(out, proposer);
    put_be16(out, static_cast<std::uint16_t>(proof.size()));
    put_bytes(out, proof);
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    put_bytes(out, payload);
    return out;
  }

  static BlockProposal decode(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    const auto tag = in.take(kTag.size());
    if (!std::equal(tag.begin(), tag.end(), kTag.begin())) throw std::invalid_argument("not a Proposal message");
    BlockProposal p;
    p.round = in.be64();
    p.proposer = in.be16();
    auto proof = in.take(in.be16());
    p.proof.assign(proof.begin(), proof.end());
    auto payload = in.take(in.be32());
    p.payload.assign(payload.begin(), payload.end());
    if (!in.done()) throw std::invalid_argument("trailing bytes after Proposal");
    return p;
  }

  friend bool operator==(const BlockProposal&, const BlockProposal&) = default;
};

/// One sortition instance in the pipeline. `after` names the round that must finish first.
struct PipelineTask {
  std::uint64_t round = 0;
  std::uint64_t permutation = 0;
  std::optional<std::uint64_t> after;
};

/// SSLE rounds and the first rounds of permutations are independent; inside a
/// permutation round r waits for r - 1.
inline std::vector<PipelineTask> pipeline_plan(std::uint64_t horizon, std::uint64_t d) {
  if (horizon == 0) throw std::invalid_argument("pipeline horizon must be at least 1");
  if (d == 0) throw std::invalid_argument("permutation length must be at least 1");
  std::vector<PipelineTask> plan;
  plan.reserve(horizon);
  for (std::uint64_t r = 1; r <= horizon; ++r) {
    PipelineTask t{r, (r - 1) / d, std::nullopt};
    if ((r - 1) % d != 0) t.after = r - 1;
    plan.push_back(t);
  }
  return plan;
}

enum class ProposalVerdict { accepted, rejected, ignored, buffered };

/// Consensus-side driver of one process: proposes when its proof claims the
/// voucher and accepts the first proposal whose proof verifies.
class Driver {
 public:
  Driver(ProcessIndex self, Word ticket, unsigned lambda) : self_(self), ticket_(ticket), lambda_(lambda) {}

  ProcessIndex self() const { return self_; }

  /// Records v_r. Returns this process's proposal when it is the elected leader.
  std::optional<BlockProposal> on_voucher(std::uint64_t round, const Bytes& voucher, Bytes payload = {}) {
    auto& st = rounds_[round];
    st.voucher = voucher;
    auto buffered = std::move(st.pending);
    st.pending.clear();
    for (const auto& p : buffered) on_proposal(p);

    auto proof = sortition::claim(ticket_, round, lambda_);
    if (!sortition::verify(self_, proof, voucher)) return std::nullopt;
    BlockProposal mine{round, self_, std::move(proof), std::move(payload)};
    on_proposal(mine);
    return mine;
  }

  ProposalVerdict on_proposal(const BlockProposal& p) {
    auto& st = rounds_[p.round];
    if (!st.voucher) {
      st.pending.push_back(p);
      return ProposalVerdict::buffered;
    }
    if (!sortition::verify(p.proposer, p.proof, *st.voucher)) {
      ++rejected_;
      return ProposalVerdict::rejected;
    }
    if (st.accepted) return ProposalVerdict::ignored;
    st.accepted = p;
    return ProposalVerdict::accepted;
  }

  const BlockProposal* accepted(std::uint64_t round) const {
    auto it = rounds_.find(round);
    return it == rounds_.end() || !it->second.accepted ? nullptr : &*it->second.accepted;
  }

  std::uint64_t rejected() const { return rejected_; }

 private:
  struct RoundView {
    std::optional<Bytes> voucher;
    std::optional<BlockProposal> accepted;
    std::vector<BlockProposal> pending;
  };

  ProcessIndex self_;
  Word ticket_;
  unsigned lambda_;
  std::map<std::uint64_t, RoundView> rounds_;
  std::uint64_t rejected_ = 0;
};

/// Per-round result exported with the transcript.
struct RoundOutcome {
  std::uint64_t round = 0;
  ProcessIndex elected = 0;      // 0 when no index claims the voucher
  std::size_t claimants = 0;     // indices whose claim verifies against v_r
  bool accepted = false;         // every correct process accepted the elected leader's block
  ProcessIndex proposer = 0;     // proposer of the accepted block, 0 if none
  std::size_t accepts = 0;       // correct processes that accepted some block
  std::size_t wrong_accepts = 0; // correct processes that accepted a block from a non-elected proposer
};

}  // namespace hsort::chain
