#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fedsmc/errors.hpp"
#include "fedsmc/params.hpp"
#include "fedsmc/rng.hpp"

namespace fedsmc {

// One hospital's random split of its weights for a round: betas maps each
// cluster member j (the holder's own index included) to the fraction of the
// owner's weight vector that j receives. The fractions sum to one; for
// clusters of two or more every fraction lies strictly inside (0,1), so no
// single received share equals the original vector.
struct CoefficientVector {
  int owner = 0;
  int cluster = 0;
  std::map<int, double> betas;
};

// payload = beta * (owner's weights), addressed to one cluster member.
struct Share {
  int source = 0;
  int target = 0;
  int round = 0;
  WeightVector payload;
};

// The sum of all shares a hospital holds after the exchange: a masked
// quantity that reveals no individual member's weights, yet sums across all
// hospitals to the exact total of the raw weights.
struct MaskedSum {
  int holder = 0;
  int cluster = 0;
  int round = 0;
  WeightVector payload;
};

// Uniform sample from the open simplex: independent unit-exponential draws,
// normalized. Every coordinate is strictly positive; n == 1 yields {1.0}.
inline std::vector<double> sample_simplex(int n, std::mt19937_64& stream) {
  if (n < 1) throw UsageError("sample_simplex: n must be >= 1");
  if (n == 1) return {1.0};
  std::exponential_distribution<double> unit_exp(1.0);
  std::vector<double> draws(n);
  double total = 0.0;
  for (double& d : draws) {
    do {
      d = unit_exp(stream);
    } while (!(d > 0.0));
    total += d;
  }
  for (double& d : draws) d /= total;
  return draws;
}

// Coefficients for `owner` in `cluster`, one per member, keyed by member
// index in ascending order.
inline CoefficientVector sample_coefficients(int owner, int cluster,
                                             const std::vector<int>& members,
                                             std::mt19937_64& stream) {
  if (members.empty()) throw UsageError("sample_coefficients: no members");
  const auto values = sample_simplex(static_cast<int>(members.size()), stream);
  std::vector<int> sorted = members;
  std::sort(sorted.begin(), sorted.end());
  CoefficientVector cv;
  cv.owner = owner;
  cv.cluster = cluster;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!cv.betas.emplace(sorted[i], values[i]).second) {
      throw UsageError("sample_coefficients: duplicate member index");
    }
  }
  return cv;
}

// Convenience form for a cluster of the given size with members 1..N.
inline CoefficientVector sample_coefficients(int cluster_size,
                                             std::mt19937_64& stream) {
  if (cluster_size < 1) {
    throw UsageError("sample_coefficients: cluster size must be >= 1");
  }
  std::vector<int> members(cluster_size);
  for (int i = 0; i < cluster_size; ++i) members[i] = i + 1;
  return sample_coefficients(0, 0, members, stream);
}

inline void require_valid_coefficients(const CoefficientVector& coeffs) {
  if (coeffs.betas.empty()) throw UsageError("coefficients: empty");
  double total = 0.0;
  for (const auto& [j, beta] : coeffs.betas) {
    const bool ok = coeffs.betas.size() == 1 ? beta == 1.0
                                             : (beta > 0.0 && beta < 1.0);
    if (!ok) {
      throw UsageError("coefficients: beta for member " + std::to_string(j) +
                       " outside (0,1)");
    }
    total += beta;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw UsageError("coefficients: betas do not sum to one");
  }
}

// Splits w into one share per cluster member; the share payloads sum back
// to w because the coefficients sum to one.
inline std::vector<Share> make_shares(const WeightVector& w,
                                      const CoefficientVector& coeffs,
                                      int round) {
  if (w.empty()) throw UsageError("make_shares: zero-dimensional weights");
  require_valid_coefficients(coeffs);
  std::vector<Share> shares;
  shares.reserve(coeffs.betas.size());
  for (const auto& [target, beta] : coeffs.betas) {
    shares.push_back({coeffs.owner, target, round, scale(w, beta)});
  }
  return shares;
}

// Sums the shares held by `holder`: exactly one from each cluster member
// (the self-share included), all from the same round. Summation runs in
// ascending source index.
inline MaskedSum accumulate_shares(int holder, int cluster,
                                   const std::vector<int>& members,
                                   const std::vector<Share>& shares) {
  if (members.empty()) throw UsageError("accumulate_shares: no members");
  std::set<int> expected(members.begin(), members.end());
  std::map<int, const Share*> by_source;
  for (const auto& s : shares) {
    if (s.target != holder) {
      throw ProtocolError("accumulate_shares: share from hospital " +
                          std::to_string(s.source) + " addressed to hospital " +
                          std::to_string(s.target) + ", not holder " +
                          std::to_string(holder));
    }
    if (!expected.count(s.source)) {
      throw ProtocolError("accumulate_shares: share from hospital " +
                          std::to_string(s.source) + " outside cluster " +
                          std::to_string(cluster));
    }
    if (!by_source.emplace(s.source, &s).second) {
      throw ProtocolError("accumulate_shares: duplicate share from hospital " +
                          std::to_string(s.source));
    }
  }
  for (int m : expected) {
    if (!by_source.count(m)) {
      throw ProtocolError("accumulate_shares: missing share from hospital " +
                          std::to_string(m));
    }
  }
  const int round = by_source.begin()->second->round;
  std::vector<WeightVector> payloads;
  payloads.reserve(by_source.size());
  for (const auto& [src, share] : by_source) {
    if (share->round != round) {
      throw ProtocolError("accumulate_shares: round mismatch (" +
                          std::to_string(share->round) + " vs " +
                          std::to_string(round) + ") from hospital " +
                          std::to_string(src));
    }
    payloads.push_back(share->payload);
  }
  return {holder, cluster, round, vec_sum(payloads)};
}

// Mean of the masked sums over all hospitals. Swapping the order of the
// per-cluster double summation shows each hospital's coefficients collapse
// to one, so this equals the plain mean of the raw weight vectors exactly
// in real arithmetic (and to rounding error in floating point) while the
// server only ever sees the masked sums.
inline WeightVector reconstruct_mean(const std::vector<MaskedSum>& sums,
                                     int total_hospitals) {
  if (total_hospitals < 1) {
    throw UsageError("reconstruct_mean: total_hospitals must be >= 1");
  }
  if (static_cast<int>(sums.size()) != total_hospitals) {
    throw ProtocolError("reconstruct_mean: expected " +
                        std::to_string(total_hospitals) + " masked sums, got " +
                        std::to_string(sums.size()));
  }
  std::map<int, const MaskedSum*> by_holder;
  for (const auto& s : sums) {
    if (s.holder < 1 || s.holder > total_hospitals) {
      throw ProtocolError("reconstruct_mean: unknown hospital " +
                          std::to_string(s.holder));
    }
    if (!by_holder.emplace(s.holder, &s).second) {
      throw ProtocolError("reconstruct_mean: duplicate masked sum from hospital " +
                          std::to_string(s.holder));
    }
  }
  const int round = sums.front().round;
  std::vector<WeightVector> payloads;
  payloads.reserve(sums.size());
  for (const auto& [holder, sum] : by_holder) {
    if (sum->round != round) {
      throw ProtocolError("reconstruct_mean: round mismatch from hospital " +
                          std::to_string(holder));
    }
    payloads.push_back(sum->payload);
  }
  return vec_mean(payloads);
}

}  // namespace fedsmc
