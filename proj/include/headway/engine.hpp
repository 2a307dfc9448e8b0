#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "headway/errors.hpp"
#include "headway/fundamental_diagram.hpp"
#include "headway/route_choice.hpp"
#include "headway/scenario.hpp"

namespace headway {

/// Autonomous-vehicle headway per link, in meters.
struct HeadwayAction {
  std::vector<double> beta_a_m;
};

struct SimState {
  double t_s = 0.0;
  std::size_t step_index = 0;
  // counts[(link * num_paths + path) * 2 + class]
  std::vector<double> counts;
  // queues[od * 2 + class]
  std::vector<double> queues;
  PathShares shares;
  std::vector<double> beta_a_m;
  double injected = 0.0;
  double exited = 0.0;
  bool last_action_clamped = false;

  friend bool operator==(const SimState&, const SimState&) = default;
};

/// Per-link quantities evaluated from the state at the start of a step.
struct LinkSnapshot {
  double count = 0.0;
  double density = 0.0;
  double autonomy_fraction = 0.0;
  double critical_density = 0.0;
  int congested = 0;
  double flow_vps = 0.0;
  double latency_s = 0.0;
  double beta_a_m = 0.0;
};

struct StepInfo {
  std::vector<LinkSnapshot> links;
  std::vector<std::vector<double>> path_latencies;  // [od][path]
  double exited = 0.0;
  double injected = 0.0;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// One row per simulated step: link snapshots at the start of the step and
/// the vehicle total (network + queues) after it.
struct EpisodeTrace {
  std::vector<double> t_s;
  std::vector<std::vector<LinkSnapshot>> links;
  std::vector<double> vehicles_after;
  std::vector<double> rewards;
  double reward_scale = 1.0;
  double total_exited = 0.0;
  std::uint64_t seed = 0;

  std::size_t num_steps() const { return t_s.size(); }

  void record(double t, const StepResult& r, double total_vehicles) {
    t_s.push_back(t);
    links.push_back(r.info.links);
    vehicles_after.push_back(total_vehicles);
    rewards.push_back(r.reward);
  }
};

/// Sum over steps of the vehicles present (links plus origin queues), in
/// vehicle-steps.
inline double total_travel_time(const EpisodeTrace& trace) {
  double ttt = 0.0;
  for (double v : trace.vehicles_after) ttt += v;
  return ttt;
}

/// Network simulator. Holds a shared immutable scenario and advances a
/// SimState; many engines may share one scenario across threads.
class Engine {
 public:
  explicit Engine(std::shared_ptr<const Scenario> scenario) : scenario_(std::move(scenario)) {
    validate(*scenario_);
    const Network& net = scenario_->network;
    num_paths_ = net.num_paths();
    next_link_.assign(num_paths_, std::vector<std::size_t>(net.num_links(), kExit));
    on_path_.assign(num_paths_, std::vector<bool>(net.num_links(), false));
    path_od_.assign(num_paths_, 0);
    for (std::size_t w = 0; w < net.od_pairs.size(); ++w) {
      paths_per_od_.push_back(net.od_pairs[w].paths.size());
      for (const Path& p : net.od_pairs[w].paths) {
        path_od_[p.id] = w;
        for (std::size_t k = 0; k < p.links.size(); ++k) {
          on_path_[p.id][p.links[k]] = true;
          if (k + 1 < p.links.size()) next_link_[p.id][p.links[k]] = p.links[k + 1];
        }
      }
    }
    peak_rate_ = 0.0;
    for (const auto& d : scenario_->demand) peak_rate_ = std::max(peak_rate_, d.peak_rate());
  }

  const Scenario& scenario() const { return *scenario_; }
  const Network& network() const { return scenario_->network; }
  std::size_t num_links() const { return scenario_->network.num_links(); }
  std::size_t num_paths() const { return num_paths_; }
  std::size_t observation_size() const { return 2 * num_links() + 2; }

  double& count(SimState& s, std::size_t link, std::size_t path, int cls) const {
    return s.counts[(link * num_paths_ + path) * kNumClasses + cls];
  }
  double count(const SimState& s, std::size_t link, std::size_t path, int cls) const {
    return s.counts[(link * num_paths_ + path) * kNumClasses + cls];
  }

  double link_count(const SimState& s, std::size_t link) const {
    double n = 0.0;
    for (std::size_t p = 0; p < num_paths_; ++p)
      for (int c = 0; c < kNumClasses; ++c) n += count(s, link, p, c);
    return n;
  }

  double link_class_count(const SimState& s, std::size_t link, VehicleClass cls) const {
    double n = 0.0;
    for (std::size_t p = 0; p < num_paths_; ++p) n += count(s, link, p, static_cast<int>(cls));
    return n;
  }

  double vehicles_in_network(const SimState& s) const {
    double n = 0.0;
    for (double c : s.counts) n += c;
    return n;
  }

  double vehicles_queued(const SimState& s) const {
    double q = 0.0;
    for (double v : s.queues) q += v;
    return q;
  }

  /// Initial state: configured counts (seed-jittered), uniform shares, human headways.
  SimState reset(std::uint64_t seed) const {
    const Scenario& sc = *scenario_;
    const Network& net = sc.network;
    SimState s;
    s.counts.assign(net.num_links() * num_paths_ * kNumClasses, 0.0);
    s.queues.assign(net.od_pairs.size() * kNumClasses, 0.0);
    s.shares = PathShares::uniform(paths_per_od_, sc.sim.mu_h, sc.sim.mu_a);
    s.beta_a_m.assign(net.num_links(), net.beta_h_m);

    std::vector<double> init = sc.sim.initial_counts;
    if (init.empty()) init = default_initial_counts(net);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t l = 0; l < net.num_links(); ++l) {
      const double u = unit(rng);
      if (init[l] <= 0.0) continue;
      const double n = init[l] * (1.0 + sc.sim.init_jitter * (2.0 * u - 1.0));
      if (n > net.links[l].jam_count())
        throw ConfigError("initial count on link " + std::to_string(l) + " exceeds jam count");

      // Spread over the paths through this link; the owning O/D's autonomy split.
      std::vector<std::size_t> through;
      for (std::size_t p = 0; p < num_paths_; ++p)
        if (on_path_[p][l]) through.push_back(p);
      if (through.empty())
        throw ConfigError("initial vehicles on link " + std::to_string(l) + " which no path uses");
      for (std::size_t p : through) {
        const double alpha = sc.demand[path_od_[p]].autonomy_fraction;
        const double share = n / static_cast<double>(through.size());
        count(s, l, p, 0) += share * (1.0 - alpha);
        count(s, l, p, 1) += share * alpha;
      }
      s.injected += n;
    }
    return s;
  }

  bool at_decision_instant(const SimState& s) const {
    return s.step_index % scenario_->sim.steps_per_action() == 0;
  }

  /// Sets per-link autonomous headways, clamping to the admissible bounds.
  void apply_action(SimState& s, const HeadwayAction& a) const {
    const Network& net = scenario_->network;
    if (a.beta_a_m.size() != net.num_links())
      throw DomainError("action must have one headway per link");
    if (!at_decision_instant(s))
      throw DomainError("headways can only change at action-period boundaries");
    s.last_action_clamped = false;
    for (std::size_t l = 0; l < a.beta_a_m.size(); ++l) {
      double b = a.beta_a_m[l];
      if (!std::isfinite(b)) throw DomainError("non-finite headway");
      if (b < net.beta_min_m || b > net.beta_max_m) {
        b = std::clamp(b, net.beta_min_m, net.beta_max_m);
        s.last_action_clamped = true;
      }
      s.beta_a_m[l] = b;
    }
  }

  /// Per-link fundamental-diagram evaluation for the current state.
  std::vector<LinkSnapshot> evaluate_links(const SimState& s) const {
    const Network& net = scenario_->network;
    std::vector<LinkSnapshot> out(net.num_links());
    for (std::size_t l = 0; l < net.num_links(); ++l) {
      const Link& link = net.links[l];
      LinkSnapshot& ls = out[l];
      ls.count = link_count(s, l);
      const double n_a = link_class_count(s, l, VehicleClass::Autonomous);
      ls.autonomy_fraction = ls.count > 0.0 ? std::clamp(n_a / ls.count, 0.0, 1.0) : 0.0;
      ls.density = ls.count / link.length_m;
      ls.beta_a_m = s.beta_a_m[l];
      ls.critical_density =
          critical_density(link.lanes, ls.autonomy_fraction, ls.beta_a_m, net.beta_h_m);
      if (ls.density > link.jam_density() * (1.0 + 1e-12))
        throw InvariantViolation(dump("density above jam on link " + std::to_string(l), s));
      ls.flow_vps = sending_flow(ls.count, link, ls.critical_density);
      ls.congested = congestion_state(ls.density, ls.critical_density);
      ls.latency_s = link_latency(ls.flow_vps, ls.congested, link, ls.critical_density);
    }
    return out;
  }

  /// Advances one dt: propagate, inject, reroute, then score.
  StepResult step(SimState& s) const {
    const Scenario& sc = *scenario_;
    const Network& net = sc.network;
    const double dt = sc.sim.dt_s;
    const std::size_t L = net.num_links();

    StepResult result;
    result.info.links = evaluate_links(s);
    const auto& snap = result.info.links;

    for (const ODPair& od : net.od_pairs) {
      std::vector<double> lat;
      lat.reserve(od.paths.size());
      for (const Path& p : od.paths) {
        std::vector<double> link_lat(L);
        for (std::size_t l = 0; l < L; ++l) link_lat[l] = snap[l].latency_s;
        lat.push_back(path_latency(p, link_lat));
      }
      result.info.path_latencies.push_back(std::move(lat));
    }

    // Link-to-link transfers, rationed by downstream free space.
    std::vector<double> out_fraction(L, 0.0);
    std::vector<double> wanted_in(L, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
      if (snap[l].count <= 0.0) continue;
      const double out = std::min(snap[l].flow_vps * dt, snap[l].count);
      out_fraction[l] = out / snap[l].count;
      for (std::size_t p = 0; p < num_paths_; ++p) {
        const std::size_t next = next_link_[p][l];
        if (next == kExit) continue;
        for (int c = 0; c < kNumClasses; ++c) wanted_in[next] += count(s, l, p, c) * out_fraction[l];
      }
    }
    std::vector<double> admit(L, 1.0);
    for (std::size_t l = 0; l < L; ++l) {
      const double space = std::max(0.0, net.links[l].jam_count() - snap[l].count);
      if (wanted_in[l] > space) admit[l] = space / wanted_in[l];
    }

    std::vector<double> next_counts = s.counts;
    double exited = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      if (out_fraction[l] <= 0.0) continue;
      for (std::size_t p = 0; p < num_paths_; ++p) {
        const std::size_t next = next_link_[p][l];
        for (int c = 0; c < kNumClasses; ++c) {
          const double cohort = count(s, l, p, c);
          if (cohort <= 0.0) continue;
          double moved = cohort * out_fraction[l];
          if (next == kExit) {
            exited += moved;
          } else {
            moved *= admit[next];
            next_counts[(next * num_paths_ + p) * kNumClasses + c] += moved;
          }
          next_counts[(l * num_paths_ + p) * kNumClasses + c] -= moved;
        }
      }
    }
    s.counts = std::move(next_counts);
    s.exited += exited;
    result.info.exited = exited;

    // Origin injection and queue discharge onto first links.
    std::vector<double> link_after(L);
    for (std::size_t l = 0; l < L; ++l) link_after[l] = link_count(s, l);
    std::vector<double> first_wanted(L, 0.0);
    for (std::size_t w = 0; w < net.od_pairs.size(); ++w) {
      const double inflow = demand_at(sc.demand[w], s.t_s) * dt;
      const double alpha = sc.demand[w].autonomy_fraction;
      s.queues[w * kNumClasses + 0] += inflow * (1.0 - alpha);
      s.queues[w * kNumClasses + 1] += inflow * alpha;
      s.injected += inflow;
      result.info.injected += inflow;
      const ODPair& od = net.od_pairs[w];
      for (int c = 0; c < kNumClasses; ++c) {
        const double q = s.queues[w * kNumClasses + c];
        for (std::size_t k = 0; k < od.paths.size(); ++k)
          first_wanted[od.paths[k].links.front()] += q * s.shares.shares[w][c][k];
      }
    }
    std::vector<double> first_admit(L, 1.0);
    for (std::size_t l = 0; l < L; ++l) {
      const double space = std::max(0.0, net.links[l].jam_count() - link_after[l]);
      if (first_wanted[l] > space) first_admit[l] = space / first_wanted[l];
    }
    for (std::size_t w = 0; w < net.od_pairs.size(); ++w) {
      const ODPair& od = net.od_pairs[w];
      for (int c = 0; c < kNumClasses; ++c) {
        double& q = s.queues[w * kNumClasses + c];
        if (q <= 0.0) continue;
        double entered = 0.0;
        bool all_admitted = true;
        for (std::size_t k = 0; k < od.paths.size(); ++k) {
          const std::size_t first = od.paths[k].links.front();
          const double e = q * s.shares.shares[w][c][k] * first_admit[first];
          if (first_admit[first] < 1.0) all_admitted = false;
          count(s, first, od.paths[k].id, c) += e;
          entered += e;
        }
        q = all_admitted ? 0.0 : std::max(0.0, q - entered);
      }
    }

    s.shares = step_shares(s.shares, result.info.path_latencies, sc.sim.latency_unit_s);

    check_invariants(s);
    result.reward = reward(s);
    s.t_s += dt;
    ++s.step_index;
    result.done = s.step_index >= sc.sim.steps_per_episode();
    result.observation = observe(s);
    return result;
  }

  /// Negative scaled vehicle total, links plus origin queues.
  double reward(const SimState& s) const {
    return -scenario_->sim.reward_scale * (vehicles_in_network(s) + vehicles_queued(s));
  }

  /// Normalized counts, autonomy fractions, episode time and demand level, all in [0,1].
  std::vector<double> observe(const SimState& s) const {
    const Network& net = scenario_->network;
    std::vector<double> obs;
    obs.reserve(observation_size());
    for (std::size_t l = 0; l < net.num_links(); ++l)
      obs.push_back(std::clamp(link_count(s, l) / net.links[l].jam_count(), 0.0, 1.0));
    for (std::size_t l = 0; l < net.num_links(); ++l) {
      const double n = link_count(s, l);
      const double n_a = link_class_count(s, l, VehicleClass::Autonomous);
      obs.push_back(n > 0.0 ? std::clamp(n_a / n, 0.0, 1.0) : 0.0);
    }
    obs.push_back(std::clamp(s.t_s / scenario_->sim.horizon_s, 0.0, 1.0));
    double rate = 0.0;
    for (const auto& d : scenario_->demand) rate += demand_at(d, s.t_s);
    obs.push_back(peak_rate_ > 0.0 ? std::clamp(rate / peak_rate_, 0.0, 1.0) : 0.0);
    return obs;
  }

  std::string dump(const std::string& what, const SimState& s) const {
    std::ostringstream os;
    os << what << " at t=" << s.t_s << "s; link counts:";
    for (std::size_t l = 0; l < num_links(); ++l) os << ' ' << link_count(s, l);
    os << "; queues:";
    for (double q : s.queues) os << ' ' << q;
    return os.str();
  }

 private:
  static constexpr std::size_t kExit = std::numeric_limits<std::size_t>::max();

  void check_invariants(SimState& s) const {
    for (double& c : s.counts) {
      if (!std::isfinite(c) || c < -1e-6) throw InvariantViolation(dump("bad vehicle count", s));
      if (c < 0.0) c = 0.0;  // rounding residue of a fully drained cohort
    }
    for (double q : s.queues)
      if (!std::isfinite(q) || q < 0.0) throw InvariantViolation(dump("bad queue", s));
  }

  std::shared_ptr<const Scenario> scenario_;
  std::size_t num_paths_ = 0;
  std::vector<std::size_t> paths_per_od_;
  std::vector<std::vector<std::size_t>> next_link_;
  std::vector<std::vector<bool>> on_path_;
  std::vector<std::size_t> path_od_;
  double peak_rate_ = 0.0;
};

/// Something that maps an observation to a headway action at each decision instant.
template <typename C>
concept Controller = requires(C c, const std::vector<double>& obs) {
  { c(obs) } -> std::convertible_to<HeadwayAction>;
};

/// Runs one full episode, querying the controller at every action-period boundary.
template <Controller C>
EpisodeTrace run_episode(const Engine& engine, std::uint64_t seed, C&& controller) {
  EpisodeTrace trace;
  trace.seed = seed;
  trace.reward_scale = engine.scenario().sim.reward_scale;
  SimState s = engine.reset(seed);
  std::vector<double> obs = engine.observe(s);
  bool done = false;
  while (!done) {
    if (engine.at_decision_instant(s)) engine.apply_action(s, controller(obs));
    const double t = s.t_s;
    StepResult r = engine.step(s);
    trace.record(t, r, engine.vehicles_in_network(s) + engine.vehicles_queued(s));
    obs = r.observation;
    done = r.done;
  }
  trace.total_exited = s.exited;
  return trace;
}

/// Decision-level MDP: one transition per action period, reward summed over
/// the inner simulation steps.
class DecisionEnv {
 public:
  explicit DecisionEnv(std::shared_ptr<const Scenario> scenario) : engine_(std::move(scenario)) {}

  const Engine& engine() const { return engine_; }
  const SimState& state() const { return state_; }

  std::vector<double> reset(std::uint64_t seed) {
    state_ = engine_.reset(seed);
    return engine_.observe(state_);
  }

  struct Transition {
    std::vector<double> observation;
    double reward = 0.0;
    double vehicles = 0.0;  // summed vehicle totals over the inner steps
    bool done = false;
  };

  Transition step(const HeadwayAction& action) {
    engine_.apply_action(state_, action);
    Transition tr;
    const std::size_t inner = engine_.scenario().sim.steps_per_action();
    for (std::size_t k = 0; k < inner; ++k) {
      StepResult r = engine_.step(state_);
      tr.reward += r.reward;
      tr.vehicles += engine_.vehicles_in_network(state_) + engine_.vehicles_queued(state_);
      tr.done = r.done;
      if (r.done) break;
    }
    tr.observation = engine_.observe(state_);
    return tr;
  }

 private:
  Engine engine_;
  SimState state_;
};

}  // namespace headway
