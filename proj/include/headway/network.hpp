#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "headway/errors.hpp"

namespace headway {

using NodeId = int;
using LinkId = std::size_t;

/// A directed road segment. All quantities are SI.
struct Link {
  LinkId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  double length_m = 0.0;
  int lanes = 1;
  double vff_mps = 0.0;
  double jam_spacing_m = 0.5;  // per-lane bumper spacing at standstill

  // Jam density in vehicles per meter (all lanes).
  double jam_density() const { return static_cast<double>(lanes) / jam_spacing_m; }
  // Number of vehicles that fill the link at jam density.
  double jam_count() const { return jam_density() * length_m; }
  double free_flow_time() const { return length_m / vff_mps; }
};

struct Path {
  std::size_t id = 0;
  std::vector<LinkId> links;
};

struct ODPair {
  NodeId origin = 0;
  NodeId destination = 0;
  std::vector<Path> paths;
};

/// Piecewise-linear inflow rate at the origin (vehicles/second).
struct DemandProfile {
  struct Breakpoint {
    double t_s = 0.0;
    double rate_vps = 0.0;
  };
  std::vector<Breakpoint> breakpoints;
  double autonomy_fraction = 0.0;

  double peak_rate() const {
    double peak = 0.0;
    for (const auto& b : breakpoints) peak = std::max(peak, b.rate_vps);
    return peak;
  }
};

struct Network {
  std::vector<std::string> nodes;
  std::vector<Link> links;
  std::vector<ODPair> od_pairs;
  double beta_min_m = 1.0;
  double beta_max_m = 10.0;
  double beta_h_m = 6.0;

  std::size_t num_links() const { return links.size(); }
  std::size_t num_paths() const {
    std::size_t n = 0;
    for (const auto& od : od_pairs) n += od.paths.size();
    return n;
  }
};

/// Linear interpolation between breakpoints, zero outside their time range.
inline double demand_at(const DemandProfile& profile, double t_s) {
  const auto& bp = profile.breakpoints;
  if (bp.empty() || t_s < bp.front().t_s || t_s > bp.back().t_s) return 0.0;
  auto hi = std::upper_bound(bp.begin(), bp.end(), t_s,
                             [](double t, const DemandProfile::Breakpoint& b) { return t < b.t_s; });
  if (hi == bp.end()) return bp.back().rate_vps;
  auto lo = std::prev(hi);
  const double span = hi->t_s - lo->t_s;
  if (span <= 0.0) return hi->rate_vps;
  const double w = (t_s - lo->t_s) / span;
  return std::max(0.0, lo->rate_vps + w * (hi->rate_vps - lo->rate_vps));
}

inline void validate(const DemandProfile& profile) {
  if (profile.autonomy_fraction < 0.0 || profile.autonomy_fraction > 1.0)
    throw ConfigError("autonomy fraction must lie in [0,1]");
  for (std::size_t i = 0; i < profile.breakpoints.size(); ++i) {
    const auto& b = profile.breakpoints[i];
    if (!(b.rate_vps >= 0.0) || !std::isfinite(b.rate_vps))
      throw ConfigError("demand rates must be finite and non-negative");
    if (i > 0 && b.t_s < profile.breakpoints[i - 1].t_s)
      throw ConfigError("demand breakpoints must be time-sorted");
  }
}

/// All simple directed paths from od.origin to od.destination, in
/// lexicographic order of their link-id sequences.
inline std::vector<Path> enumerate_paths(const Network& net, NodeId origin, NodeId destination) {
  std::vector<std::vector<LinkId>> out_links(net.nodes.size());
  for (const auto& l : net.links) {
    if (l.from < 0 || l.to < 0 || static_cast<std::size_t>(l.from) >= net.nodes.size() ||
        static_cast<std::size_t>(l.to) >= net.nodes.size())
      throw ScenarioError("link " + std::to_string(l.id) + " references an unknown node");
    out_links[l.from].push_back(l.id);
  }
  for (auto& v : out_links) std::sort(v.begin(), v.end());

  std::vector<Path> paths;
  std::vector<LinkId> stack;
  std::vector<bool> visited(net.nodes.size(), false);

  auto dfs = [&](auto&& self, NodeId node) -> void {
    if (node == destination) {
      paths.push_back(Path{paths.size(), stack});
      return;
    }
    visited[node] = true;
    for (LinkId lid : out_links[node]) {
      const NodeId next = net.links[lid].to;
      if (visited[next]) continue;
      stack.push_back(lid);
      self(self, next);
      stack.pop_back();
    }
    visited[node] = false;
  };
  dfs(dfs, origin);

  if (paths.empty())
    throw ScenarioError("no path from node " + std::to_string(origin) + " to node " +
                        std::to_string(destination));
  return paths;
}

inline std::vector<Path> enumerate_paths(const Network& net, const ODPair& od) {
  return enumerate_paths(net, od.origin, od.destination);
}

// Walks a path and checks that consecutive links share a node and no node repeats.
inline bool is_simple_path(const Network& net, std::span<const LinkId> links, NodeId origin,
                           NodeId destination) {
  if (links.empty()) return origin == destination;
  std::vector<NodeId> seen{origin};
  NodeId at = origin;
  for (LinkId lid : links) {
    if (lid >= net.links.size() || net.links[lid].from != at) return false;
    at = net.links[lid].to;
    if (std::find(seen.begin(), seen.end(), at) != seen.end()) return false;
    seen.push_back(at);
  }
  return at == destination;
}

/// Checks every type invariant of the network; throws ConfigError/ScenarioError.
inline void validate(const Network& net) {
  if (!(net.beta_min_m > 0.0) || !(net.beta_min_m < net.beta_max_m))
    throw ConfigError("headway bounds must satisfy 0 < beta_min < beta_max");
  if (net.beta_h_m < net.beta_min_m || net.beta_h_m > net.beta_max_m)
    throw ConfigError("human headway must lie within the headway bounds");
  for (std::size_t i = 0; i < net.links.size(); ++i) {
    const Link& l = net.links[i];
    const std::string tag = "link " + std::to_string(i) + ": ";
    if (l.id != i) throw ConfigError(tag + "link ids must be 0..L-1 in order");
    if (!(l.length_m > 0.0)) throw ConfigError(tag + "length must be positive");
    if (l.lanes < 1) throw ConfigError(tag + "lanes must be at least 1");
    if (!(l.vff_mps > 0.0)) throw ConfigError(tag + "free-flow speed must be positive");
    if (!(l.jam_spacing_m > 0.0)) throw ConfigError(tag + "jam spacing must be positive");
    if (!(l.jam_spacing_m < net.beta_min_m))
      throw ConfigError(tag + "jam spacing must be below the minimum headway");
  }
  if (net.od_pairs.empty()) throw ScenarioError("network has no O/D pair");
  for (const auto& od : net.od_pairs) {
    if (od.origin == od.destination) throw ScenarioError("origin equals destination");
    if (od.paths.empty()) throw ScenarioError("O/D pair has no paths");
    for (const auto& p : od.paths)
      if (!is_simple_path(net, p.links, od.origin, od.destination))
        throw ScenarioError("path " + std::to_string(p.id) + " is not a simple O/D path");
  }
}

/// Fills od_pairs[*].paths by enumeration and assigns network-wide path ids.
inline void assign_paths(Network& net) {
  std::size_t next_id = 0;
  for (auto& od : net.od_pairs) {
    od.paths = enumerate_paths(net, od);
    for (auto& p : od.paths) p.id = next_id++;
  }
}

/// Optional knobs applied on top of the built-in scenario defaults.
struct ScenarioOverrides {
  std::optional<std::vector<int>> lanes;
  std::optional<double> beta_h_m;
  std::optional<double> jam_spacing_m;
  std::optional<double> beta_min_m;
  std::optional<double> beta_max_m;
  std::optional<double> vff_mps;
};

namespace detail {

inline void apply_overrides(Network& net, const ScenarioOverrides& o) {
  if (o.lanes) {
    if (o.lanes->size() != net.links.size())
      throw ConfigError("lane override must list one value per link");
    for (std::size_t i = 0; i < net.links.size(); ++i) net.links[i].lanes = (*o.lanes)[i];
  }
  if (o.beta_h_m) net.beta_h_m = *o.beta_h_m;
  if (o.beta_min_m) net.beta_min_m = *o.beta_min_m;
  if (o.beta_max_m) net.beta_max_m = *o.beta_max_m;
  for (auto& l : net.links) {
    if (o.jam_spacing_m) l.jam_spacing_m = *o.jam_spacing_m;
    if (o.vff_mps) l.vff_mps = *o.vff_mps;
  }
}

inline Link make_link(LinkId id, NodeId from, NodeId to, double length_m, int lanes) {
  return Link{id, from, to, length_m, lanes, 30.0, 0.5};
}

}  // namespace detail

// Classic Braess diamond: O=0, A=1, B=2, D=3.
//   0: O->A  1: A->D  2: O->B  3: B->D  4: A->B (short, wide)
inline Network build_braess_5(const ScenarioOverrides& overrides = {}) {
  Network net;
  net.nodes = {"O", "A", "B", "D"};
  net.links = {
      detail::make_link(0, 0, 1, 240000.0, 4), detail::make_link(1, 1, 3, 240000.0, 2),
      detail::make_link(2, 0, 2, 240000.0, 2), detail::make_link(3, 2, 3, 240000.0, 4),
      detail::make_link(4, 1, 2, 60000.0, 8),
  };
  net.od_pairs = {ODPair{0, 3, {}}};
  detail::apply_overrides(net, overrides);
  assign_paths(net);
  validate(net);
  return net;
}

// Braess diamond O,A,B -> M followed by a second stage M -> D.
//   0: O->A  1: A->M  2: O->B  3: B->M  4: A->B
//   5: M->C (as link 2)  6: C->D (as link 3)  7: M->D (as link 4)
inline Network build_braess_8(const ScenarioOverrides& overrides = {}) {
  Network net;
  net.nodes = {"O", "A", "B", "M", "C", "D"};
  net.links = {
      detail::make_link(0, 0, 1, 240000.0, 4), detail::make_link(1, 1, 3, 240000.0, 2),
      detail::make_link(2, 0, 2, 240000.0, 2), detail::make_link(3, 2, 3, 240000.0, 4),
      detail::make_link(4, 1, 2, 60000.0, 8),  detail::make_link(5, 3, 4, 240000.0, 2),
      detail::make_link(6, 4, 5, 240000.0, 4), detail::make_link(7, 3, 5, 60000.0, 8),
  };
  net.od_pairs = {ODPair{0, 5, {}}};
  detail::apply_overrides(net, overrides);
  assign_paths(net);
  validate(net);
  return net;
}

/// Peak-hour trapezoid: ramp up over 40 min, hold to 80 min, ramp down by
/// 120 min, then a cool-down with zero inflow until the horizon.
inline DemandProfile trapezoid_demand(double peak_vps, double autonomy_fraction,
                                      double horizon_s = 12000.0) {
  DemandProfile d;
  d.autonomy_fraction = autonomy_fraction;
  d.breakpoints = {{0.0, 0.0}, {2400.0, peak_vps}, {4800.0, peak_vps}, {7200.0, 0.0}};
  if (horizon_s > 7200.0) d.breakpoints.push_back({horizon_s, 0.0});
  return d;
}

}  // namespace headway
