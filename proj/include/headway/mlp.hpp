#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "headway/errors.hpp"

namespace headway {

/// Layer widths of a dense tanh network: input, hidden..., output.
/// Hidden layers use tanh; the output layer is affine.
struct MlpShape {
  std::vector<std::size_t> widths;

  std::size_t input_size() const { return widths.front(); }
  std::size_t output_size() const { return widths.back(); }
  std::size_t num_layers() const { return widths.size() - 1; }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) n += widths[k + 1] * (widths[k] + 1);
    return n;
  }

  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

/// Post-activation values for every layer; activations[0] is the input.
struct MlpCache {
  std::vector<std::vector<double>> activations;
};

// Parameter layout per layer: weights row-major (out x in), then bias (out).
inline std::vector<double> mlp_forward(const MlpShape& shape, std::span<const double> params,
                                       std::span<const double> input, MlpCache* cache = nullptr) {
  if (input.size() != shape.input_size()) throw DomainError("network input has the wrong size");
  if (params.size() != shape.num_params()) throw DomainError("parameter count mismatch");
  std::vector<double> x(input.begin(), input.end());
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  std::size_t offset = 0;
  for (std::size_t k = 0; k < shape.num_layers(); ++k) {
    const std::size_t in = shape.widths[k], out = shape.widths[k + 1];
    const double* w = params.data() + offset;
    const double* b = w + out * in;
    std::vector<double> y(out);
    const bool hidden = k + 1 < shape.num_layers();
    for (std::size_t i = 0; i < out; ++i) {
      double acc = b[i];
      for (std::size_t j = 0; j < in; ++j) acc += w[i * in + j] * x[j];
      y[i] = hidden ? std::tanh(acc) : acc;
    }
    offset += out * (in + 1);
    x = std::move(y);
    if (cache) cache->activations.push_back(x);
  }
  return x;
}

/// Reverse pass: accumulates d(loss)/d(params) into grad given d(loss)/d(output).
inline void mlp_backward(const MlpShape& shape, std::span<const double> params, const MlpCache& cache,
                         std::span<const double> d_output, std::span<double> grad) {
  std::vector<std::size_t> offsets(shape.num_layers());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < shape.num_layers(); ++k) {
    offsets[k] = offset;
    offset += shape.widths[k + 1] * (shape.widths[k] + 1);
  }
  std::vector<double> delta(d_output.begin(), d_output.end());
  for (std::size_t k = shape.num_layers(); k-- > 0;) {
    const std::size_t in = shape.widths[k], out = shape.widths[k + 1];
    const double* w = params.data() + offsets[k];
    double* gw = grad.data() + offsets[k];
    double* gb = gw + out * in;
    const auto& x = cache.activations[k];
    for (std::size_t i = 0; i < out; ++i) {
      gb[i] += delta[i];
      for (std::size_t j = 0; j < in; ++j) gw[i * in + j] += delta[i] * x[j];
    }
    if (k == 0) break;
    std::vector<double> prev(in, 0.0);
    for (std::size_t i = 0; i < out; ++i)
      for (std::size_t j = 0; j < in; ++j) prev[j] += w[i * in + j] * delta[i];
    // x is tanh output of the previous layer: d tanh = 1 - y^2
    for (std::size_t j = 0; j < in; ++j) prev[j] *= 1.0 - x[j] * x[j];
    delta = std::move(prev);
  }
}

/// Orthogonal initialization per layer with the given gains, zero biases.
inline void mlp_init_orthogonal(const MlpShape& shape, std::span<double> params, std::mt19937_64& rng,
                                double hidden_gain, double output_gain) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < shape.num_layers(); ++k) {
    const std::size_t in = shape.widths[k], out = shape.widths[k + 1];
    const double gain = k + 1 < shape.num_layers() ? hidden_gain : output_gain;
    // Orthonormalize along the shorter dimension with modified Gram-Schmidt.
    const bool by_rows = out <= in;
    const std::size_t count = by_rows ? out : in, len = by_rows ? in : out;
    std::vector<std::vector<double>> vecs(count, std::vector<double>(len));
    for (auto& v : vecs) {
      for (double& e : v) e = normal(rng);
    }
    for (std::size_t a = 0; a < count; ++a) {
      for (std::size_t b = 0; b < a; ++b) {
        double dot = 0.0;
        for (std::size_t e = 0; e < len; ++e) dot += vecs[a][e] * vecs[b][e];
        for (std::size_t e = 0; e < len; ++e) vecs[a][e] -= dot * vecs[b][e];
      }
      double norm = 0.0;
      for (double e : vecs[a]) norm += e * e;
      norm = std::sqrt(norm);
      for (double& e : vecs[a]) e /= norm;
    }
    double* w = params.data() + offset;
    for (std::size_t i = 0; i < out; ++i)
      for (std::size_t j = 0; j < in; ++j)
        w[i * in + j] = gain * (by_rows ? vecs[i][j] : vecs[j][i]);
    for (std::size_t i = 0; i < out; ++i) w[out * in + i] = 0.0;
    offset += out * (in + 1);
  }
}

}  // namespace headway
