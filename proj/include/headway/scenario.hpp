#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "headway/fundamental_diagram.hpp"
#include "headway/network.hpp"

namespace headway {

struct SimConfig {
  double dt_s = 60.0;
  double horizon_s = 12000.0;
  double action_period_s = 600.0;
  // One entry per link, or empty for the scenario's default loading.
  std::vector<double> initial_counts;
  double mu_h = 0.1;
  double mu_a = 0.1;
  // Latencies are divided by this before they are multiplied by mu.
  double latency_unit_s = 1.0;
  double reward_scale = 1.0e-6;
  // Seeded multiplicative perturbation of initial counts, uniform in [1-j, 1+j].
  double init_jitter = 0.1;
  std::uint64_t seed = 0;

  std::size_t steps_per_episode() const { return static_cast<std::size_t>(horizon_s / dt_s + 0.5); }
  std::size_t steps_per_action() const { return static_cast<std::size_t>(action_period_s / dt_s + 0.5); }
  std::size_t decisions_per_episode() const {
    return (steps_per_episode() + steps_per_action() - 1) / steps_per_action();
  }
};

/// Everything needed to run an episode. Immutable once built.
struct Scenario {
  std::string name;
  Network network;
  std::vector<DemandProfile> demand;  // one per O/D pair
  SimConfig sim;
};

inline void validate(const Scenario& s) {
  validate(s.network);
  if (s.demand.size() != s.network.od_pairs.size())
    throw ConfigError("one demand profile is required per O/D pair");
  for (const auto& d : s.demand) validate(d);
  const SimConfig& c = s.sim;
  if (!(c.dt_s > 0.0) || !(c.horizon_s >= c.dt_s)) throw ConfigError("need 0 < dt <= horizon");
  if (!(c.action_period_s >= c.dt_s)) throw ConfigError("action period must be at least dt");
  const double ratio = c.action_period_s / c.dt_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw ConfigError("action period must be a multiple of dt");
  if (!(c.mu_h >= 0.0) || !(c.mu_a >= 0.0)) throw ConfigError("rationality factors must be >= 0");
  if (!(c.latency_unit_s > 0.0)) throw ConfigError("latency unit must be positive");
  if (!(c.reward_scale > 0.0)) throw ConfigError("reward scale must be positive");
  if (!(c.init_jitter >= 0.0 && c.init_jitter < 1.0)) throw ConfigError("jitter must be in [0,1)");
  if (!c.initial_counts.empty() && c.initial_counts.size() != s.network.num_links())
    throw ConfigError("initial_counts must list one value per link");
  for (double n : c.initial_counts)
    if (!(n >= 0.0)) throw ConfigError("initial counts must be non-negative");
}

/// Loads links 0 and 2 to the given fraction of their critical count with
/// human headways, everything else empty.
inline std::vector<double> default_initial_counts(const Network& net, double load = 0.3) {
  std::vector<double> counts(net.num_links(), 0.0);
  for (LinkId l : {LinkId{0}, LinkId{2}}) {
    if (l >= net.num_links()) continue;
    const Link& link = net.links[l];
    counts[l] = load * critical_density(link.lanes, 0.0, net.beta_h_m, net.beta_h_m) * link.length_m;
  }
  return counts;
}

/// Peak inflow used by the built-in scenarios: a multiple of link 0's capacity
/// at the human headway.
inline double default_peak_rate(const Network& net, double multiple = 4.0) {
  const Link& l0 = net.links.front();
  return multiple * capacity(l0.vff_mps, critical_density(l0.lanes, 0.0, net.beta_h_m, net.beta_h_m));
}

inline Scenario make_scenario(std::string name, Network net, double autonomy_fraction = 0.8) {
  Scenario s;
  s.name = std::move(name);
  s.sim = SimConfig{};
  s.demand = {trapezoid_demand(default_peak_rate(net), autonomy_fraction, s.sim.horizon_s)};
  s.sim.initial_counts = default_initial_counts(net);
  s.network = std::move(net);
  validate(s);
  return s;
}

inline Scenario braess5_scenario(const ScenarioOverrides& o = {}) {
  return make_scenario("braess5", build_braess_5(o));
}

inline Scenario braess8_scenario(const ScenarioOverrides& o = {}) {
  return make_scenario("braess8", build_braess_8(o));
}

}  // namespace headway
