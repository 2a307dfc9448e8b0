#pragma once

#include <cmath>
#include <span>
#include <string>

#include "headway/errors.hpp"
#include "headway/network.hpp"

namespace headway {

// Latency reported for a congested link that currently sends nothing.
inline constexpr double kLatencySentinel_s = 1.0e6;

/// Mixed-autonomy critical density (veh/m): lanes divided by the
/// autonomy-weighted mean headway.
inline double critical_density(int lanes, double autonomy_fraction, double beta_a_m,
                               double beta_h_m) {
  if (!(beta_a_m > 0.0) || !(beta_h_m > 0.0)) throw DomainError("headways must be positive");
  if (lanes < 1) throw DomainError("lane count must be at least 1");
  if (!(autonomy_fraction >= 0.0 && autonomy_fraction <= 1.0))
    throw DomainError("autonomy fraction must lie in [0,1]");
  const double mean_headway = autonomy_fraction * beta_a_m + (1.0 - autonomy_fraction) * beta_h_m;
  return static_cast<double>(lanes) / mean_headway;
}

inline double capacity(double vff_mps, double critical_density) { return vff_mps * critical_density; }

/// Triangular fundamental diagram evaluated at the link's current count.
/// Returns vehicles/second.
inline double sending_flow(double count, const Link& link, double critical_density) {
  const double rho = count / link.length_m;
  const double rho_jam = link.jam_density();
  if (!(critical_density < rho_jam))
    throw InvariantViolation("critical density must be below jam density on link " +
                             std::to_string(link.id));
  if (rho <= critical_density) return link.vff_mps * rho;
  if (rho <= rho_jam)
    return link.vff_mps * critical_density * (rho_jam - rho) / (rho_jam - critical_density);
  return 0.0;
}

/// 0 = free flow, 1 = congested. The critical density itself counts as free flow.
inline int congestion_state(double density, double critical_density) {
  return density <= critical_density ? 0 : 1;
}

/// Travel time through a link. In the congested regime this is the time
/// implied by the current flow; zero flow maps to kLatencySentinel_s.
inline double link_latency(double flow_vps, int congested, const Link& link,
                           double critical_density) {
  const double free_time = link.free_flow_time();
  if (congested == 0) return free_time;
  if (!(flow_vps > 0.0)) return kLatencySentinel_s;
  const double rho_jam = link.jam_density();
  const double e = link.length_m * (rho_jam / flow_vps +
                                    (critical_density - rho_jam) / (link.vff_mps * critical_density));
  // e >= d/v whenever flow <= capacity; the clamp only absorbs rounding.
  return std::min(std::max(e, free_time), kLatencySentinel_s);
}

inline double path_latency(const Path& path, std::span<const double> link_latencies) {
  double total = 0.0;
  for (LinkId l : path.links) total += link_latencies[l];
  return total;
}

}  // namespace headway
