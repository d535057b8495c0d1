#include <gtest/gtest.h>

#include "hsort/stake.hpp"

using hsort::InvalidStakeTable;
using hsort::StakeTable;

TEST(StakeTable, TotalsAndThreshold) {
  StakeTable t({2, 2, 2}, 2);
  EXPECT_EQ(t.size(), 3u);
  EXPECT_EQ(t.total(), 6u);
  EXPECT_EQ(t.byzantine_bound(), 2u);
  EXPECT_EQ(t.threshold(), 3u);
  EXPECT_EQ(t.stake(1), 2u);
  EXPECT_TRUE(t.contains(3));
  EXPECT_FALSE(t.contains(0));
  EXPECT_FALSE(t.contains(4));
}

TEST(StakeTable, StakeOfSubset) {
  StakeTable t({1, 2, 3, 4, 10}, 9);
  const std::vector<hsort::ProcessIndex> members{2, 5};
  EXPECT_EQ(t.stake_of(members), 12u);
}

TEST(StakeTable, SingleProcessWithoutFaults) {
  StakeTable t({1}, 0);
  EXPECT_EQ(t.threshold(), 1u);
}

TEST(StakeTable, RejectsByzantineBoundAtHalf) {
  EXPECT_THROW(StakeTable({3, 3}, 3), InvalidStakeTable);
  EXPECT_THROW(StakeTable({1, 1, 1, 1}, 2), InvalidStakeTable);
  EXPECT_NO_THROW(StakeTable({1, 1, 1, 1}, 1));
  EXPECT_NO_THROW(StakeTable({1, 1, 1, 1, 1}, 2));
}

TEST(StakeTable, RejectsZeroStakeAndEmptyCommittee) {
  EXPECT_THROW(StakeTable({1, 0, 2}, 0), InvalidStakeTable);
  EXPECT_THROW(StakeTable({}, 0), InvalidStakeTable);
}

TEST(StakeTable, RejectsOverflowingTotal) {
  const auto big = std::numeric_limits<std::uint64_t>::max() / 2 + 1;
  EXPECT_THROW(StakeTable({big, big}, 0), InvalidStakeTable);
}

TEST(StakeTable, HugeBoundDoesNotWrap) {
  const auto max = std::numeric_limits<std::uint64_t>::max();
  EXPECT_THROW(StakeTable({max}, max - 1), InvalidStakeTable);
  EXPECT_NO_THROW(StakeTable({max}, max / 2 - 1));
}
