#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "headway/headway.hpp"

namespace headway::fixtures {

inline double rel_err(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

/// One-link O->D network, 240 km, zero demand, given initial count, no jitter.
inline Scenario single_link_scenario(double initial_count, int lanes = 4) {
  Scenario s;
  s.name = "single";
  s.network.nodes = {"O", "D"};
  s.network.links = {Link{0, 0, 1, 240000.0, lanes, 30.0, 0.5}};
  s.network.od_pairs = {ODPair{0, 1, {}}};
  assign_paths(s.network);
  DemandProfile d;
  d.autonomy_fraction = 0.8;
  d.breakpoints = {{0.0, 0.0}, {12000.0, 0.0}};
  s.demand = {d};
  s.sim.initial_counts = {initial_count};
  s.sim.init_jitter = 0.0;
  validate(s);
  return s;
}

/// Closed-form free-flow drain: n0 * r^t summed over steps 1..T, r = 1 - v dt / d.
inline double geometric_drain_ttt(double n0, double v, double dt, double d, std::size_t steps) {
  double total = 0.0;
  for (std::size_t t = 1; t <= steps; ++t) total += n0 * std::pow(1.0 - v * dt / d, static_cast<double>(t));
  return total;
}

/// A random small policy and a matching buffer of samples whose old
/// log-probabilities sit near the current ones.
struct GradInstance {
  PolicyParams params;
  RolloutBuffer buf;
  std::vector<std::size_t> indices;
};

inline GradInstance random_grad_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 3);
  const std::size_t obs_dim = dim(rng) + 1, act_dim = dim(rng), hidden = dim(rng) + 2;
  GradInstance g;
  g.params = PolicyParams::create(obs_dim, act_dim, 1.0, 10.0, {hidden});
  for (double& v : g.params.theta) v = 0.5 * normal(rng);
  g.buf.obs_dim = obs_dim;
  g.buf.action_dim = act_dim;
  const std::size_t n = 6;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> obs(obs_dim);
    for (double& o : obs) o = normal(rng);
    const auto mean = mlp_forward(g.params.policy_shape, g.params.policy_params(), obs);
    std::vector<double> raw(act_dim);
    for (std::size_t k = 0; k < act_dim; ++k) raw[k] = mean[k] + std::exp(g.params.log_std()[k]) * normal(rng);
    g.buf.observations.insert(g.buf.observations.end(), obs.begin(), obs.end());
    g.buf.raw_actions.insert(g.buf.raw_actions.end(), raw.begin(), raw.end());
    g.buf.log_probs.push_back(gaussian_log_prob(mean, g.params.log_std(), raw) + 0.08 * normal(rng));
    g.buf.values.push_back(normal(rng));
    g.buf.rewards.push_back(normal(rng));
    g.buf.dones.push_back(0);
    g.buf.advantages.push_back(normal(rng));
    g.buf.returns.push_back(normal(rng));
    g.indices.push_back(i);
  }
  return g;
}

/// Largest relative gap between the analytic loss gradient and central
/// differences with step h.
inline double max_gradient_error(GradInstance g, double clip = 0.2, double h = 1e-5) {
  std::vector<double> grad(g.params.theta.size(), 0.0);
  ppo_loss(g.params, g.buf, g.indices, clip, 0.5, grad);
  std::vector<double> scratch(grad.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < g.params.theta.size(); ++k) {
    const double keep = g.params.theta[k];
    g.params.theta[k] = keep + h;
    const double up = ppo_loss(g.params, g.buf, g.indices, clip, 0.5, scratch).loss;
    g.params.theta[k] = keep - h;
    const double down = ppo_loss(g.params, g.buf, g.indices, clip, 0.5, scratch).loss;
    g.params.theta[k] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(numeric), std::abs(grad[k]), 1e-6});
    worst = std::max(worst, std::abs(numeric - grad[k]) / denom);
  }
  return worst;
}

}  // namespace headway::fixtures
