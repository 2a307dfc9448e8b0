#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "headway/engine.hpp"
#include "headway/errors.hpp"
#include "headway/mlp.hpp"
#include "headway/network.hpp"

namespace headway {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr int kObservationSpecVersion = 1;

inline double sigmoid(double u) {
  return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Gaussian policy over unsquashed actions plus a separate value network.
/// All trainable numbers live in `theta`: policy net, value net, log-std.
struct PolicyParams {
  MlpShape policy_shape;
  MlpShape value_shape;
  std::vector<double> theta;
  double beta_min_m = 1.0;
  double beta_max_m = 10.0;

  std::size_t obs_dim() const { return policy_shape.input_size(); }
  std::size_t action_dim() const { return policy_shape.output_size(); }

  std::size_t value_offset() const { return policy_shape.num_params(); }
  std::size_t log_std_offset() const { return value_offset() + value_shape.num_params(); }

  std::span<const double> policy_params() const {
    return std::span<const double>(theta).subspan(0, policy_shape.num_params());
  }
  std::span<const double> value_params() const {
    return std::span<const double>(theta).subspan(value_offset(), value_shape.num_params());
  }
  std::span<const double> log_std() const {
    return std::span<const double>(theta).subspan(log_std_offset(), action_dim());
  }
  std::span<double> log_std() {
    return std::span<double>(theta).subspan(log_std_offset(), action_dim());
  }

  void clamp_log_std() {
    for (double& s : log_std()) s = std::clamp(s, kLogStdMin, kLogStdMax);
  }

  void check_finite() const {
    for (double v : theta)
      if (!std::isfinite(v)) throw DomainError("non-finite policy parameter");
  }

  /// Default architecture: two tanh layers of `hidden` units for both networks.
  static PolicyParams create(std::size_t obs_dim, std::size_t action_dim, double beta_min_m,
                             double beta_max_m, std::vector<std::size_t> hidden = {64, 64}) {
    PolicyParams p;
    p.policy_shape.widths.push_back(obs_dim);
    p.value_shape.widths.push_back(obs_dim);
    for (std::size_t h : hidden) {
      p.policy_shape.widths.push_back(h);
      p.value_shape.widths.push_back(h);
    }
    p.policy_shape.widths.push_back(action_dim);
    p.value_shape.widths.push_back(1);
    p.theta.assign(p.policy_shape.num_params() + p.value_shape.num_params() + action_dim, 0.0);
    p.beta_min_m = beta_min_m;
    p.beta_max_m = beta_max_m;
    return p;
  }

  /// Orthogonal init; the policy mean starts at `initial_beta_m` on every link.
  void initialize(std::mt19937_64& rng, double initial_beta_m, double initial_log_std = 0.0) {
    std::span<double> all(theta);
    mlp_init_orthogonal(policy_shape, all.subspan(0, policy_shape.num_params()), rng, std::sqrt(2.0),
                        0.01);
    mlp_init_orthogonal(value_shape, all.subspan(value_offset(), value_shape.num_params()), rng,
                        std::sqrt(2.0), 1.0);
    const double u0 = headway_to_raw(initial_beta_m);
    const std::size_t bias_at = policy_shape.num_params() - action_dim();
    for (std::size_t i = 0; i < action_dim(); ++i) theta[bias_at + i] = u0;
    for (double& s : log_std()) s = initial_log_std;
  }

  double raw_to_headway(double u) const { return beta_min_m + (beta_max_m - beta_min_m) * sigmoid(u); }

  double headway_to_raw(double beta_m) const {
    const double p = (beta_m - beta_min_m) / (beta_max_m - beta_min_m);
    return logit(std::clamp(p, 1e-9, 1.0 - 1e-9));
  }
};

/// Policy mean (unsquashed) and state value.
struct ForwardResult {
  std::vector<double> mean;
  double value = 0.0;
};

inline ForwardResult mlp_forward(const PolicyParams& params, std::span<const double> obs) {
  params.check_finite();
  ForwardResult r;
  r.mean = mlp_forward(params.policy_shape, params.policy_params(), obs);
  r.value = mlp_forward(params.value_shape, params.value_params(), obs)[0];
  return r;
}

enum class ActMode { Stochastic, Deterministic };

struct PolicyAction {
  std::vector<double> raw;  // pre-squash sample
  HeadwayAction action;
};

/// Samples (or takes the mean of) the Gaussian head and squashes each
/// component into [beta_min, beta_max] with a sigmoid.
inline PolicyAction policy_act(const PolicyParams& params, std::span<const double> obs, ActMode mode,
                               std::mt19937_64* rng = nullptr) {
  if (obs.size() != params.obs_dim()) throw DomainError("observation has the wrong dimension");
  PolicyAction out;
  out.raw = mlp_forward(params.policy_shape, params.policy_params(), obs);
  if (mode == ActMode::Stochastic) {
    if (!rng) throw DomainError("stochastic action needs a random generator");
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto log_std = params.log_std();
    for (std::size_t i = 0; i < out.raw.size(); ++i) out.raw[i] += std::exp(log_std[i]) * normal(*rng);
  }
  out.action.beta_a_m.resize(out.raw.size());
  for (std::size_t i = 0; i < out.raw.size(); ++i)
    out.action.beta_a_m[i] = params.raw_to_headway(out.raw[i]);
  return out;
}

/// Baseline 1: autonomous cars keep the human headway everywhere.
inline HeadwayAction uniform_headway_policy(const Network& net) {
  return HeadwayAction{std::vector<double>(net.num_links(), net.beta_h_m)};
}

/// Baseline 2: autonomous cars keep the smallest admissible headway everywhere.
inline HeadwayAction min_headway_policy(const Network& net) {
  return HeadwayAction{std::vector<double>(net.num_links(), net.beta_min_m)};
}

// Checkpoint file: JSON header plus the flat parameter array.

inline nlohmann::json to_json(const PolicyParams& p) {
  nlohmann::json j;
  j["format"] = "headway-policy";
  j["version"] = 1;
  j["observation_spec_version"] = kObservationSpecVersion;
  j["policy_layers"] = p.policy_shape.widths;
  j["value_layers"] = p.value_shape.widths;
  j["beta_min_m"] = p.beta_min_m;
  j["beta_max_m"] = p.beta_max_m;
  j["theta"] = p.theta;
  return j;
}

inline PolicyParams policy_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "headway-policy")
      throw ConfigError("not a headway policy checkpoint");
    if (j.at("observation_spec_version").get<int>() != kObservationSpecVersion)
      throw ConfigError("checkpoint observation spec version mismatch");
    PolicyParams p;
    p.policy_shape.widths = j.at("policy_layers").get<std::vector<std::size_t>>();
    p.value_shape.widths = j.at("value_layers").get<std::vector<std::size_t>>();
    p.beta_min_m = j.at("beta_min_m").get<double>();
    p.beta_max_m = j.at("beta_max_m").get<double>();
    p.theta = j.at("theta").get<std::vector<double>>();
    if (p.policy_shape.widths.size() < 2 || p.value_shape.widths.size() < 2 ||
        p.value_shape.output_size() != 1 || p.policy_shape.input_size() != p.value_shape.input_size())
      throw ConfigError("inconsistent checkpoint layer shapes");
    if (p.theta.size() !=
        p.policy_shape.num_params() + p.value_shape.num_params() + p.action_dim())
      throw ConfigError("checkpoint parameter count does not match its layer shapes");
    if (!(p.beta_min_m < p.beta_max_m)) throw ConfigError("checkpoint headway bounds are invalid");
    p.check_finite();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const PolicyParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint " + path);
  out << to_json(p).dump(1) << '\n';
}

inline PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
  return policy_from_json(j);
}

}  // namespace headway
