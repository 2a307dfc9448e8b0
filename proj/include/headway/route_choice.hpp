#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "headway/errors.hpp"

namespace headway {

enum class VehicleClass : int { Human = 0, Autonomous = 1 };
inline constexpr int kNumClasses = 2;

/// Exponential-weight route update: each path's share is scaled by
/// exp(-mu * latency) and the vector renormalized. Weights are shifted by the
/// minimum latency so that large latencies cannot underflow the denominator.
inline std::vector<double> logit_update(std::span<const double> shares,
                                        std::span<const double> latencies, double mu) {
  if (shares.size() != latencies.size())
    throw DomainError("shares and latencies must have the same length");
  if (!(mu >= 0.0)) throw DomainError("rationality factor must be non-negative");

  double e_min = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < shares.size(); ++p) {
    if (shares[p] > 0.0) e_min = std::min(e_min, latencies[p]);
  }
  if (!std::isfinite(e_min)) throw DomainError("all path shares are zero");

  std::vector<double> out(shares.size(), 0.0);
  double total = 0.0;
  for (std::size_t p = 0; p < shares.size(); ++p) {
    if (shares[p] <= 0.0) continue;
    out[p] = shares[p] * std::exp(-mu * (latencies[p] - e_min));
    total += out[p];
  }
  for (double& s : out) s /= total;
  return out;
}

/// Per-class route shares for every O/D pair.
struct PathShares {
  // shares[od][class][path-within-od]
  std::vector<std::array<std::vector<double>, kNumClasses>> shares;
  double mu_h = 0.1;
  double mu_a = 0.1;

  double mu(VehicleClass c) const { return c == VehicleClass::Human ? mu_h : mu_a; }

  friend bool operator==(const PathShares&, const PathShares&) = default;

  static PathShares uniform(std::span<const std::size_t> paths_per_od, double mu_h, double mu_a) {
    PathShares s;
    s.mu_h = mu_h;
    s.mu_a = mu_a;
    for (std::size_t n : paths_per_od) {
      std::vector<double> u(n, 1.0 / static_cast<double>(n));
      s.shares.push_back({u, u});
    }
    return s;
  }
};

/// Applies logit_update to both classes of every O/D pair. path_latencies is
/// indexed [od][path-within-od]; latency_unit_s rescales latencies before
/// they meet mu.
inline PathShares step_shares(const PathShares& state,
                              std::span<const std::vector<double>> path_latencies,
                              double latency_unit_s = 1.0) {
  if (path_latencies.size() != state.shares.size())
    throw DomainError("latencies missing for some O/D pair");
  PathShares next = state;
  for (std::size_t w = 0; w < state.shares.size(); ++w) {
    std::vector<double> scaled(path_latencies[w].size());
    for (std::size_t p = 0; p < scaled.size(); ++p) scaled[p] = path_latencies[w][p] / latency_unit_s;
    for (int c = 0; c < kNumClasses; ++c) {
      next.shares[w][c] =
          logit_update(state.shares[w][c], scaled, state.mu(static_cast<VehicleClass>(c)));
    }
  }
  return next;
}

}  // namespace headway
