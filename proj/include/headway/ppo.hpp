#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "headway/engine.hpp"
#include "headway/errors.hpp"
#include "headway/mlp.hpp"
#include "headway/policy.hpp"

namespace headway {

/// Diagonal Gaussian log-density, summed over dimensions.
inline double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                                std::span<const double> sample) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (sample[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -kHalfLog2Pi - log_std[i] - 0.5 * z * z;
  }
  return lp;
}

/// Log-density of the squashed headway: Gaussian term minus the log-Jacobian
/// of u -> beta_min + (beta_max - beta_min) * sigmoid(u). The Jacobian term
/// depends only on the stored sample, so it cancels in likelihood ratios.
inline double squashed_log_prob(const PolicyParams& params, std::span<const double> mean,
                                std::span<const double> raw) {
  double lp = gaussian_log_prob(mean, params.log_std(), raw);
  const double width = params.beta_max_m - params.beta_min_m;
  for (double u : raw) {
    const double s = sigmoid(u);
    lp -= std::log(width * s * (1.0 - s));
  }
  return lp;
}

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// values holds one entry per reward plus the bootstrap value of the state
/// after the last transition.
inline GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                             std::span<const std::uint8_t> dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n)
    throw DomainError("GAE needs n rewards, n dones and n+1 values");
  GaeResult r;
  r.advantages.assign(n, 0.0);
  r.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    r.advantages[t] = next_adv;
    r.returns[t] = next_adv + values[t];
  }
  return r;
}

struct TrainConfig {
  double learning_rate = 2.0e-4;
  std::size_t n_steps = 2048;  // decision steps per update, pooled over envs
  std::size_t batch_size = 64;
  double clip_range = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  std::size_t epochs = 10;
  std::size_t total_steps = 200000;  // decision-step budget
  std::uint64_t seed = 0;
  std::size_t n_envs = 8;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  double adam_eps = 1.0e-5;
  double initial_log_std = 0.0;
  std::vector<std::size_t> hidden = {64, 64};
  std::vector<std::uint64_t> eval_seeds = {1000, 1001, 1002, 1003, 1004};
  std::size_t threads = 0;  // 0: HEADWAY_CTRL_THREADS or hardware concurrency

  void validate() const {
    if (!(clip_range > 0.0 && clip_range < 1.0)) throw ConfigError("clip range must be in (0,1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0,1]");
    if (!(gae_lambda > 0.0 && gae_lambda <= 1.0)) throw ConfigError("GAE lambda must be in (0,1]");
    if (batch_size == 0 || n_steps % batch_size != 0)
      throw ConfigError("batch size must divide the rollout size");
    if (n_envs == 0 || n_steps % n_envs != 0) throw ConfigError("env count must divide the rollout size");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (eval_seeds.empty()) throw ConfigError("at least one evaluation seed is required");
  }
};

struct RolloutBuffer {
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> observations;  // size * obs_dim
  std::vector<double> raw_actions;   // size * action_dim
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return log_probs.size(); }

  std::span<const double> obs(std::size_t i) const {
    return std::span<const double>(observations).subspan(i * obs_dim, obs_dim);
  }
  std::span<const double> raw(std::size_t i) const {
    return std::span<const double>(raw_actions).subspan(i * action_dim, action_dim);
  }

  void append(const RolloutBuffer& other) {
    auto cat = [](auto& a, const auto& b) { a.insert(a.end(), b.begin(), b.end()); };
    cat(observations, other.observations);
    cat(raw_actions, other.raw_actions);
    cat(log_probs, other.log_probs);
    cat(rewards, other.rewards);
    cat(values, other.values);
    cat(dones, other.dones);
    cat(advantages, other.advantages);
    cat(returns, other.returns);
  }
};

/// Rescales advantages in place to zero mean and unit standard deviation.
inline void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double stddev = std::sqrt(var / n);
  for (double& a : adv) a = (a - mean) / (stddev + 1e-8);
}

struct LossStats {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped-surrogate loss plus weighted value loss over the given samples,
/// with its exact gradient accumulated into grad (same layout as theta).
inline LossStats ppo_loss(const PolicyParams& params, const RolloutBuffer& buf,
                          std::span<const std::size_t> indices, double clip_range, double value_coef,
                          std::span<double> grad) {
  LossStats st;
  const double inv_b = 1.0 / static_cast<double>(indices.size());
  const auto log_std = params.log_std();
  std::span<double> g_policy = grad.subspan(0, params.policy_shape.num_params());
  std::span<double> g_value = grad.subspan(params.value_offset(), params.value_shape.num_params());
  std::span<double> g_log_std = grad.subspan(params.log_std_offset(), params.action_dim());
  MlpCache pc, vc;
  std::vector<double> d_mean(params.action_dim());

  for (std::size_t i : indices) {
    const auto obs = buf.obs(i);
    const auto raw = buf.raw(i);
    const auto mean = mlp_forward(params.policy_shape, params.policy_params(), obs, &pc);
    const double value = mlp_forward(params.value_shape, params.value_params(), obs, &vc)[0];

    const double lp = gaussian_log_prob(mean, log_std, raw);
    const double ratio = std::exp(lp - buf.log_probs[i]);
    const double adv = buf.advantages[i];
    const double clipped = std::clamp(ratio, 1.0 - clip_range, 1.0 + clip_range);
    const double surrogate = std::min(ratio * adv, clipped * adv);
    st.policy_loss -= surrogate * inv_b;
    if (std::abs(ratio - 1.0) > clip_range) st.clip_fraction += inv_b;

    // The unclipped term is the active minimum unless the ratio has left
    // the trust interval in the direction the advantage favours.
    const bool active = adv >= 0.0 ? ratio <= 1.0 + clip_range : ratio >= 1.0 - clip_range;
    if (active) {
      const double d_lp = -adv * ratio * inv_b;
      for (std::size_t k = 0; k < mean.size(); ++k) {
        const double inv_var = std::exp(-2.0 * log_std[k]);
        const double diff = raw[k] - mean[k];
        d_mean[k] = d_lp * diff * inv_var;
        g_log_std[k] += d_lp * (diff * diff * inv_var - 1.0);
      }
      mlp_backward(params.policy_shape, params.policy_params(), pc, d_mean, g_policy);
    }

    const double err = value - buf.returns[i];
    st.value_loss += err * err * inv_b;
    const double d_value = value_coef * 2.0 * err * inv_b;
    mlp_backward(params.value_shape, params.value_params(), vc, std::span<const double>(&d_value, 1),
                 g_value);
  }
  st.loss = st.policy_loss + value_coef * st.value_loss;
  return st;
}

/// Adam with bias correction.
struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;

  void step(std::span<double> theta, std::span<const double> grad, double lr, double eps) {
    constexpr double b1 = 0.9, b2 = 0.999;
    if (m.size() != theta.size()) {
      m.assign(theta.size(), 0.0);
      v.assign(theta.size(), 0.0);
    }
    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
      theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
};

/// Epochs of shuffled minibatch descent on the clipped objective. Advantages
/// in buf are normalized in place first.
inline UpdateStats ppo_update(PolicyParams& params, AdamState& adam, RolloutBuffer& buf,
                              const TrainConfig& cfg, std::mt19937_64& rng) {
  normalize_advantages(buf.advantages);
  std::vector<std::size_t> order(buf.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(params.theta.size());
  UpdateStats stats;
  std::size_t batches = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + cfg.batch_size <= order.size(); start += cfg.batch_size) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const auto idx = std::span<const std::size_t>(order).subspan(start, cfg.batch_size);
      const LossStats ls = ppo_loss(params, buf, idx, cfg.clip_range, cfg.value_coef, grad);
      if (!std::isfinite(ls.loss)) throw InvariantViolation("non-finite PPO loss; update aborted");
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      norm = std::sqrt(norm);
      if (cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm)
        for (double& g : grad) g *= cfg.max_grad_norm / norm;
      adam.step(params.theta, grad, cfg.learning_rate, cfg.adam_eps);
      params.clamp_log_std();
      stats.policy_loss += ls.policy_loss;
      stats.value_loss += ls.value_loss;
      stats.clip_fraction += ls.clip_fraction;
      ++batches;
    }
  }
  if (batches > 0) {
    stats.policy_loss /= static_cast<double>(batches);
    stats.value_loss /= static_cast<double>(batches);
    stats.clip_fraction /= static_cast<double>(batches);
  }
  return stats;
}

/// Worker count: explicit value, else HEADWAY_CTRL_THREADS, else hardware.
inline std::size_t resolve_threads(std::size_t requested) {
  std::size_t n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("HEADWAY_CTRL_THREADS")) n = std::strtoul(env, nullptr, 10);
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
/// processed by exactly one worker, so results land in fixed slots.
inline void parallel_for(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Mean episode TTT of the deterministic policy over the given seeds.
inline double evaluate_policy(const PolicyParams& params, const std::shared_ptr<const Scenario>& scenario,
                              std::span<const std::uint64_t> seeds, std::size_t threads = 1) {
  Engine engine(scenario);
  std::vector<double> ttt(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    ttt[i] = total_travel_time(run_episode(engine, seeds[i], [&](const std::vector<double>& obs) {
      return policy_act(params, obs, ActMode::Deterministic).action;
    }));
  });
  return std::accumulate(ttt.begin(), ttt.end(), 0.0) / static_cast<double>(ttt.size());
}

struct CurvePoint {
  std::size_t update_index = 0;
  std::size_t env_steps = 0;
  double mean_eval_ttt = 0.0;
  double best_eval_ttt = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
};

struct TrainResult {
  PolicyParams best;       // best-so-far by evaluation TTT
  PolicyParams last;       // parameters after the final update
  double initial_eval_ttt = 0.0;
  double best_eval_ttt = 0.0;
  std::vector<CurvePoint> curve;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Per-env rollout worker: owns an env, its RNG, and the episode counter.
struct RolloutWorker {
  DecisionEnv env;
  std::mt19937_64 rng;
  std::uint64_t base_seed;
  std::uint64_t episodes = 0;
  std::vector<double> obs;
  bool needs_reset = true;

  RolloutWorker(std::shared_ptr<const Scenario> s, std::uint64_t seed)
      : env(std::move(s)), rng(seed), base_seed(seed) {}

  /// Collects `steps` decision transitions with GAE already computed.
  RolloutBuffer collect(const PolicyParams& params, std::size_t steps, double gamma, double lambda) {
    RolloutBuffer b;
    b.obs_dim = params.obs_dim();
    b.action_dim = params.action_dim();
    for (std::size_t t = 0; t < steps; ++t) {
      if (needs_reset) {
        obs = env.reset(mix_seed(base_seed, episodes++));
        needs_reset = false;
      }
      const ForwardResult fwd = mlp_forward(params, obs);
      PolicyAction act = policy_act(params, obs, ActMode::Stochastic, &rng);
      b.observations.insert(b.observations.end(), obs.begin(), obs.end());
      b.raw_actions.insert(b.raw_actions.end(), act.raw.begin(), act.raw.end());
      b.log_probs.push_back(gaussian_log_prob(fwd.mean, params.log_std(), act.raw));
      b.values.push_back(fwd.value);
      auto tr = env.step(act.action);
      b.rewards.push_back(tr.reward);
      b.dones.push_back(tr.done ? 1 : 0);
      obs = std::move(tr.observation);
      if (tr.done) needs_reset = true;
    }
    std::vector<double> values = b.values;
    values.push_back(needs_reset ? 0.0 : mlp_forward(params, obs).value);
    GaeResult g = compute_gae(b.rewards, values, b.dones, gamma, lambda);
    b.advantages = std::move(g.advantages);
    b.returns = std::move(g.returns);
    return b;
  }
};

/// Alternates parallel rollout collection and clipped policy-gradient
/// updates. Deterministic for a fixed seed regardless of thread count.
inline TrainResult train(const std::shared_ptr<const Scenario>& scenario, const TrainConfig& cfg,
                         const std::function<void(const CurvePoint&)>& on_update = {}) {
  cfg.validate();
  const Network& net = scenario->network;
  Engine probe(scenario);
  std::mt19937_64 rng(mix_seed(cfg.seed, 0xA11CE));
  PolicyParams params =
      PolicyParams::create(probe.observation_size(), net.num_links(), net.beta_min_m, net.beta_max_m, cfg.hidden);
  params.initialize(rng, net.beta_h_m, cfg.initial_log_std);

  const std::size_t threads = resolve_threads(cfg.threads);
  TrainResult result;
  result.initial_eval_ttt = evaluate_policy(params, scenario, cfg.eval_seeds, threads);
  result.best_eval_ttt = result.initial_eval_ttt;
  result.best = params;
  result.last = params;

  const std::size_t updates = cfg.total_steps / cfg.n_steps;
  if (updates == 0) return result;

  std::vector<RolloutWorker> workers;
  for (std::size_t k = 0; k < cfg.n_envs; ++k) workers.emplace_back(scenario, mix_seed(cfg.seed, k + 1));
  const std::size_t per_env = cfg.n_steps / cfg.n_envs;
  AdamState adam;

  for (std::size_t u = 1; u <= updates; ++u) {
    std::vector<RolloutBuffer> parts(cfg.n_envs);
    parallel_for(cfg.n_envs, threads, [&](std::size_t k) {
      parts[k] = workers[k].collect(params, per_env, cfg.gamma, cfg.gae_lambda);
    });
    RolloutBuffer buf = parts[0];
    for (std::size_t k = 1; k < parts.size(); ++k) buf.append(parts[k]);

    const UpdateStats us = ppo_update(params, adam, buf, cfg, rng);
    const double eval = evaluate_policy(params, scenario, cfg.eval_seeds, threads);
    if (eval < result.best_eval_ttt) {
      result.best_eval_ttt = eval;
      result.best = params;
    }
    CurvePoint pt{u, u * cfg.n_steps, eval, result.best_eval_ttt, us.policy_loss, us.value_loss,
                  us.clip_fraction};
    result.curve.push_back(pt);
    if (on_update) on_update(pt);
  }
  result.last = params;
  return result;
}

}  // namespace headway
