#pragma once

// The cubic NLSE  i psi_t + 1/2 psi_xx + beta |psi|^2 psi = 0  written for
// psi = u + i v, its stationary bright soliton, and measurement noise.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "nlse/autodiff.hpp"
#include "nlse/error.hpp"
#include "nlse/model.hpp"
#include "nlse/sampling.hpp"

namespace nlse {

template <typename Scalar>
struct FieldSample {
  Scalar x{0};
  Scalar t{0};
  Scalar u{0};
  Scalar v{0};

  friend bool operator==(const FieldSample&, const FieldSample&) = default;
};

template <typename Scalar>
struct Residual {
  Scalar f_u{0};
  Scalar f_v{0};
};

// f_u = u_t + v_xx / 2 + beta (u^2 + v^2) v
// f_v = v_t - u_xx / 2 - beta (u^2 + v^2) u
template <typename Scalar>
Residual<Scalar> residuals(const NetworkJet<Scalar>& j, Scalar beta) {
  const Scalar q = j.u * j.u + j.v * j.v;
  return {j.u_t + Scalar(0.5) * j.v_xx + beta * q * j.v, j.v_t - Scalar(0.5) * j.u_xx - beta * q * j.u};
}

// Batched residuals over network output jets (row 0 = u, row 1 = v), written
// into a 2 x N matrix with rows f_u, f_v.
template <typename Scalar>
void residuals_into(const JetBlock<Scalar>& out, Scalar beta, MatrixX<Scalar>& f) {
  const auto u = out.value.row(0).array();
  const auto v = out.value.row(1).array();
  f.resize(2, out.points());
  f.row(0).array() = out.d_dt.row(0).array() + Scalar(0.5) * out.d2_dx2.row(1).array() + beta * (u.square() + v.square()) * v;
  f.row(1).array() = out.d_dt.row(1).array() - Scalar(0.5) * out.d2_dx2.row(0).array() - beta * (u.square() + v.square()) * u;
}

template <typename Scalar>
MatrixX<Scalar> residuals(const JetBlock<Scalar>& out, Scalar beta) {
  MatrixX<Scalar> f;
  residuals_into(out, beta, f);
  return f;
}

inline void require_positive_beta(double beta) {
  if (!(beta > 0)) throw DomainError("exact_solution: beta must be positive");
}

// psi(x, t) = sech(x) exp(i t / 2) / sqrt(beta)
template <typename Scalar>
FieldValue<Scalar> exact_solution(Scalar beta, Scalar x, Scalar t) {
  require_positive_beta(static_cast<double>(beta));
  const Scalar a = Scalar(1) / (std::sqrt(beta) * std::cosh(x));
  return {a * std::cos(t / 2), a * std::sin(t / 2)};
}

// Hand-derived value and partials of exact_solution, using
// sech' = -sech tanh and sech'' = sech (1 - 2 sech^2).
template <typename Scalar>
NetworkJet<Scalar> exact_jet(Scalar beta, Scalar x, Scalar t) {
  require_positive_beta(static_cast<double>(beta));
  const Scalar amp = Scalar(1) / std::sqrt(beta);
  const Scalar s = Scalar(1) / std::cosh(x);
  const Scalar ds = -s * std::tanh(x);
  const Scalar d2s = s * (Scalar(1) - Scalar(2) * s * s);
  const Scalar c = std::cos(t / 2);
  const Scalar n = std::sin(t / 2);
  NetworkJet<Scalar> j;
  j.u = amp * s * c;
  j.v = amp * s * n;
  j.u_x = amp * ds * c;
  j.v_x = amp * ds * n;
  j.u_t = -Scalar(0.5) * amp * s * n;
  j.v_t = Scalar(0.5) * amp * s * c;
  j.u_xx = amp * d2s * c;
  j.v_xx = amp * d2s * n;
  return j;
}

template <typename Scalar>
std::vector<FieldSample<Scalar>> exact_samples(Scalar beta, const PointMatrix<Scalar>& points) {
  std::vector<FieldSample<Scalar>> out;
  out.reserve(static_cast<std::size_t>(points.cols()));
  for (Index i = 0; i < points.cols(); ++i) {
    const auto f = exact_solution(beta, points(0, i), points(1, i));
    out.push_back({points(0, i), points(1, i), f.u, f.v});
  }
  return out;
}

// Population standard deviation of the u and v components.
template <typename Scalar>
std::pair<Scalar, Scalar> component_std(std::span<const FieldSample<Scalar>> samples) {
  const auto n = static_cast<Scalar>(samples.size());
  Scalar mu = 0, mv = 0;
  for (const auto& s : samples) {
    mu += s.u;
    mv += s.v;
  }
  mu /= n;
  mv /= n;
  Scalar vu = 0, vv = 0;
  for (const auto& s : samples) {
    vu += (s.u - mu) * (s.u - mu);
    vv += (s.v - mv) * (s.v - mv);
  }
  return {std::sqrt(vu / n), std::sqrt(vv / n)};
}

// Standard deviations of the noise add_noise injects at this level.
template <typename Scalar>
std::pair<Scalar, Scalar> noise_scales(std::span<const FieldSample<Scalar>> clean, double level) {
  if (level < 0) throw ConfigError("noise level must be non-negative");
  if (level == 0) return {Scalar(0), Scalar(0)};
  if (clean.size() < 2) throw DomainError("add_noise: need at least 2 samples to scale noise by component std");
  const auto [su, sv] = component_std(clean);
  return {static_cast<Scalar>(level) * su, static_cast<Scalar>(level) * sv};
}

// u' = u + level * std(u) * xi,  v' = v + level * std(v) * xi'  (xi, xi' standard normal).
// Draws alternate u, v per sample.
template <typename Scalar>
std::vector<FieldSample<Scalar>> add_noise(std::span<const FieldSample<Scalar>> samples, double level, Rng& rng) {
  const auto [nu, nv] = noise_scales(samples, level);
  std::vector<FieldSample<Scalar>> out(samples.begin(), samples.end());
  if (level == 0) return out;
  for (auto& s : out) {
    s.u += nu * static_cast<Scalar>(rng.normal());
    s.v += nv * static_cast<Scalar>(rng.normal());
  }
  return out;
}

}  // namespace nlse
