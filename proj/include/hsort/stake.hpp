#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsort {

/// Process identifiers are 1-based, matching the index hashed into vouchers.
using ProcessIndex = std::uint16_t;

struct InvalidStakeTable : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Committee stake distribution S with total s_t and Byzantine bound s_f.
///
/// Construction enforces every stake >= 1 and s_f < s_t / 2; an instance is
/// therefore always a valid committee.
class StakeTable {
 public:
  StakeTable(std::vector<std::uint64_t> stakes, std::uint64_t byzantine_bound)
      : stakes_(std::move(stakes)), byzantine_bound_(byzantine_bound) {
    if (stakes_.empty()) throw InvalidStakeTable("committee must have at least one process");
    if (stakes_.size() > std::numeric_limits<ProcessIndex>::max())
      throw InvalidStakeTable("committee larger than 65535 processes");
    for (std::size_t i = 0; i < stakes_.size(); ++i) {
      if (stakes_[i] == 0) throw InvalidStakeTable("stake of process " + std::to_string(i + 1) + " is zero");
      if (total_ > std::numeric_limits<std::uint64_t>::max() - stakes_[i])
        throw InvalidStakeTable("total stake overflows 64 bits");
      total_ += stakes_[i];
    }
    if (byzantine_bound_ >= total_ || byzantine_bound_ >= total_ - byzantine_bound_)
      throw InvalidStakeTable("s_f=" + std::to_string(byzantine_bound_) + " must be < s_t/2 (s_t=" +
                              std::to_string(total_) + ")");
  }

  std::size_t size() const { return stakes_.size(); }
  std::uint64_t stake(ProcessIndex i) const { return stakes_.at(i - 1); }
  std::span<const std::uint64_t> stakes() const { return stakes_; }
  std::uint64_t total() const { return total_; }
  std::uint64_t byzantine_bound() const { return byzantine_bound_; }
  /// Stake needed to decrypt: s_f + 1.
  std::uint64_t threshold() const { return byzantine_bound_ + 1; }

  std::uint64_t stake_of(std::span<const ProcessIndex> members) const {
    std::uint64_t sum = 0;
    for (auto i : members) sum += stake(i);
    return sum;
  }

  bool contains(ProcessIndex i) const { return i >= 1 && i <= stakes_.size(); }

 private:
  std::vector<std::uint64_t> stakes_;
  std::uint64_t byzantine_bound_;
  std::uint64_t total_ = 0;
};

}  // namespace hsort
