#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "hsort/encdom.hpp"
#include "hsort/setup.hpp"
#include "hsort/sortition.hpp"
#include "hsort/stake.hpp"

namespace hsort::experiment {

using circuits::CostAccumulator;

struct ChiSquare {
  double statistic = 0;
  std::size_t dof = 0;
  double p_value = 1;
};

/// Pearson goodness of fit. Cells with zero probability are dropped; an
/// observation in such a cell yields p = 0.
inline ChiSquare chi_square(const std::vector<std::uint64_t>& observed, const std::vector<double>& probabilities) {
  if (observed.size() != probabilities.size()) throw std::invalid_argument("observed and expected differ in length");
  std::uint64_t total = 0;
  for (auto o : observed) total += o;
  ChiSquare out;
  std::size_t cells = 0;
  bool impossible = false;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (probabilities[i] <= 0) {
      impossible |= observed[i] > 0;
      continue;
    }
    const double e = probabilities[i] * static_cast<double>(total);
    const double diff = static_cast<double>(observed[i]) - e;
    out.statistic += diff * diff / e;
    ++cells;
  }
  out.dof = cells > 0 ? cells - 1 : 0;
  if (impossible) {
    out.p_value = 0;
  } else if (out.dof > 0) {
    boost::math::chi_squared dist(static_cast<double>(out.dof));
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  }
  return out;
}

/// Sums independent chi-square statistics and their degrees of freedom.
inline ChiSquare pool(const std::vector<ChiSquare>& parts) {
  ChiSquare out;
  for (const auto& p : parts) {
    out.statistic += p.statistic;
    out.dof += p.dof;
    if (p.p_value == 0 && p.dof == 0) out.p_value = 0;
  }
  if (out.dof > 0 && out.p_value != 0) {
    boost::math::chi_squared dist(static_cast<double>(out.dof));
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  }
  return out;
}

/// A committee that runs rounds without a network: one engine computes the
/// encrypted voucher, every key holder contributes its share in index order
/// until the threshold is met, and the voucher is decrypted.
class LockstepCommittee {
 public:
  struct Options {
    unsigned word_bits = 64;
    unsigned lambda = 256;
    encdom::AttestationScheme scheme = encdom::AttestationScheme::hmac_sha256;
    std::uint64_t seed = 0;
  };

  struct Result {
    std::uint64_t round = 0;
    Bytes voucher;
    ProcessIndex elected = 0;  // 0 unless exactly one claim verifies
    std::size_t claimants = 0;
  };

  LockstepCommittee(StakeTable stakes, Options options) : options_(options), cost_(stakes.total()) {
    keys_ = encdom::keygen(stakes, options.scheme, options.seed);
    domain_ = std::make_shared<encdom::ThresholdDomain>(std::move(stakes), keys_.pub,
                                                        encdom::DomainOptions{options.word_bits, options.lambda});
    const auto n = domain_->stakes().size();
    std::mt19937_64 rng(options.seed ^ 0x10c457e9ULL);
    std::vector<setup::Contribution> contributions;
    for (std::size_t i = 1; i <= n; ++i)
      contributions.push_back(setup::random_contribution(static_cast<ProcessIndex>(i), n, options.word_bits, rng));
    auto ceremony = setup::combine(contributions, *domain_);
    for (std::size_t i = 1; i <= n; ++i)
      tickets_.push_back(setup::deliver_ticket(ceremony, static_cast<ProcessIndex>(i), static_cast<ProcessIndex>(i)));
    engine_.emplace(1, domain_, ceremony.artifacts, keys_.share(1));
  }

  Result run_round(std::uint64_t round, std::uint64_t d) {
    const auto& st = engine_->begin_round(round, d, cost_);
    const auto& handle = st.voucher_handle();
    std::optional<Bytes> voucher;
    for (std::size_t j = 1; j <= tickets_.size() && !voucher; ++j) {
      const auto who = static_cast<ProcessIndex>(j);
      engine_->on_pvoucher(round, domain_->pdec(who, keys_.share(who), handle));
      voucher = engine_->try_decrypt(round);
    }
    if (!voucher) throw std::logic_error("lockstep committee failed to decrypt");
    if (round > 1) engine_->forget(round - 1);

    Result out{round, *voucher, 0, 0};
    for (std::size_t i = 1; i <= tickets_.size(); ++i) {
      const auto who = static_cast<ProcessIndex>(i);
      if (sortition::verify(who, sortition::claim(tickets_[i - 1], round, options_.lambda), *voucher)) {
        ++out.claimants;
        out.elected = who;
      }
    }
    if (out.claimants != 1) out.elected = 0;
    return out;
  }

  /// Rounds first..first+d-1, which must open a permutation.
  std::vector<Result> run_permutation(std::uint64_t first, std::uint64_t d) {
    if ((first - 1) % d != 0) throw std::invalid_argument("round does not open a permutation");
    std::vector<Result> out;
    for (std::uint64_t r = first; r < first + d; ++r) out.push_back(run_round(r, d));
    return out;
  }

  circuits::Word ticket(ProcessIndex i) const { return tickets_.at(i - 1); }
  const encdom::ThresholdDomain& domain() const { return *domain_; }
  const sortition::Engine& engine() const { return *engine_; }
  const CostAccumulator& cost() const { return cost_; }

 private:
  Options options_;
  encdom::KeyMaterial keys_;
  std::shared_ptr<encdom::ThresholdDomain> domain_;
  std::vector<circuits::Word> tickets_;
  std::optional<sortition::Engine> engine_;
  CostAccumulator cost_;
};

// ---------------------------------------------------------------------------
// Fairness experiments.

struct Frequency {
  std::vector<std::uint64_t> counts;
  std::vector<double> expected;  // probabilities
  std::uint64_t trials = 0;
  ChiSquare chi;

  /// (observed - expected) / binomial sigma, per process.
  std::vector<double> z_scores() const {
    std::vector<double> z;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double p = expected[i];
      const double t = static_cast<double>(trials);
      const double sigma = std::sqrt(t * p * (1 - p));
      z.push_back(sigma > 0 ? (static_cast<double>(counts[i]) - t * p) / sigma : 0);
    }
    return z;
  }

  bool within_sigmas(double k) const {
    for (auto z : z_scores())
      if (std::abs(z) > k) return false;
    return true;
  }
};

inline std::vector<double> stake_shares(const StakeTable& stakes) {
  std::vector<double> p;
  for (auto s : stakes.stakes()) p.push_back(static_cast<double>(s) / static_cast<double>(stakes.total()));
  return p;
}

struct ExperimentOptions {
  std::uint64_t seed = 0;
  unsigned word_bits = 64;
  unsigned lambda = 256;
  encdom::AttestationScheme scheme = encdom::AttestationScheme::hmac_sha256;
  /// Each block of this many trials runs on a fresh committee with a derived seed.
  std::uint64_t trials_per_committee = 1000;
};

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t block) {
  return read_be64(Sha256{}.update("hsort/experiment").update_be64(master).update_be64(block).finish());
}

struct SsleStats {
  Frequency leaders;
  std::uint64_t uniqueness_violations = 0;  // rounds without exactly one claimant
};

inline SsleStats ssle_fairness(const StakeTable& stakes, std::uint64_t trials, const ExperimentOptions& opt = {}) {
  if (trials == 0) throw std::invalid_argument("trials must be at least 1");
  SsleStats out;
  out.leaders.counts.assign(stakes.size(), 0);
  out.leaders.expected = stake_shares(stakes);
  out.leaders.trials = trials;
  const auto block = std::max<std::uint64_t>(1, opt.trials_per_committee);
  for (std::uint64_t done = 0, b = 0; done < trials; ++b) {
    LockstepCommittee committee(stakes, {opt.word_bits, opt.lambda, opt.scheme, derive_seed(opt.seed, b)});
    for (std::uint64_t r = 1; r <= block && done < trials; ++r, ++done) {
      const auto res = committee.run_round(r, 1);
      if (res.claimants != 1) ++out.uniqueness_violations;
      if (res.elected) ++out.leaders.counts[res.elected - 1];
    }
  }
  out.leaders.chi = chi_square(out.leaders.counts, out.leaders.expected);
  return out;
}

struct SlpStats {
  std::uint64_t trials = 0;
  std::uint64_t d = 1;
  std::uint64_t not_permutations = 0;
  Frequency first;
  /// second[i][j]: permutations whose first pick is i + 1 and second pick j + 1.
  std::vector<std::vector<std::uint64_t>> second;
  std::vector<ChiSquare> conditional;  // one per first pick
  ChiSquare pooled;
  std::vector<std::vector<ProcessIndex>> sample;  // first few permutations

  /// S[j] / (s_t - S[i]) for j != i.
  static std::vector<double> conditional_expectation(const StakeTable& stakes, ProcessIndex first) {
    std::vector<double> p(stakes.size(), 0);
    const double rest = static_cast<double>(stakes.total() - stakes.stake(first));
    for (std::size_t j = 1; j <= stakes.size(); ++j)
      if (j != first) p[j - 1] = static_cast<double>(stakes.stake(static_cast<ProcessIndex>(j))) / rest;
    return p;
  }
};

inline SlpStats slp_fairness(const StakeTable& stakes, std::uint64_t d, std::uint64_t trials,
                             const ExperimentOptions& opt = {}, std::size_t keep_sample = 0) {
  if (trials == 0) throw std::invalid_argument("trials must be at least 1");
  if (d == 0 || d > stakes.size()) throw std::invalid_argument("d must be in [1, n]");
  const auto n = stakes.size();
  SlpStats out;
  out.trials = trials;
  out.d = d;
  out.first.counts.assign(n, 0);
  out.first.expected = stake_shares(stakes);
  out.first.trials = trials;
  out.second.assign(n, std::vector<std::uint64_t>(n, 0));
  const auto block = std::max<std::uint64_t>(1, opt.trials_per_committee);
  for (std::uint64_t done = 0, b = 0; done < trials; ++b) {
    LockstepCommittee committee(stakes, {opt.word_bits, opt.lambda, opt.scheme, derive_seed(opt.seed, b)});
    for (std::uint64_t k = 0; k < block && done < trials; ++k, ++done) {
      const auto perm = committee.run_permutation(k * d + 1, d);
      std::vector<ProcessIndex> picks;
      std::set<ProcessIndex> seen;
      bool ok = true;
      for (const auto& res : perm) {
        picks.push_back(res.elected);
        ok &= res.elected != 0 && seen.insert(res.elected).second;
      }
      if (!ok) ++out.not_permutations;
      if (out.sample.size() < keep_sample) out.sample.push_back(picks);
      if (picks[0]) ++out.first.counts[picks[0] - 1];
      if (d >= 2 && picks[0] && picks[1]) ++out.second[picks[0] - 1][picks[1] - 1];
    }
  }
  out.first.chi = chi_square(out.first.counts, out.first.expected);
  if (d >= 2) {
    for (std::size_t i = 1; i <= n; ++i) {
      std::uint64_t row = 0;
      for (auto c : out.second[i - 1]) row += c;
      if (row == 0) continue;
      out.conditional.push_back(
          chi_square(out.second[i - 1], SlpStats::conditional_expectation(stakes, static_cast<ProcessIndex>(i))));
    }
    out.pooled = pool(out.conditional);
  }
  return out;
}

inline std::string format_frequency(const Frequency& f) {
  std::ostringstream os;
  os << std::fixed;
  os << "process\tcount\tfrequency\texpected\tz\n";
  const auto z = f.z_scores();
  for (std::size_t i = 0; i < f.counts.size(); ++i)
    os << (i + 1) << '\t' << f.counts[i] << '\t' << std::setprecision(5)
       << static_cast<double>(f.counts[i]) / static_cast<double>(f.trials) << '\t' << f.expected[i] << '\t'
       << std::setprecision(3) << z[i] << '\n';
  os << std::setprecision(4) << "chi2 " << f.chi.statistic << " df " << f.chi.dof << " p " << std::setprecision(6)
     << f.chi.p_value << '\n';
  return os.str();
}

}  // namespace hsort::experiment
