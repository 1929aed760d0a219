#include "stopnav/training/losses.hpp"

#include <cmath>
#include <string>

#include "stopnav/error.hpp"

namespace stopnav::training {

void validate(const LossConfig& config) {
  if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda)) {
    throw Error(ErrorCode::invalid_argument, "loss: lambda must be finite and >= 0");
  }
  if (!(config.gamma >= 0.0 && config.gamma <= 1.0)) throw Error(ErrorCode::invalid_argument, "loss: gamma must lie in [0, 1]");
}

double clamped_log(double x, std::size_t* clamps) {
  if (x < kLogEpsilon) {
    if (clamps) ++*clamps;
    return std::log(kLogEpsilon);
  }
  return std::log(x);
}

double direction_loss(std::span<const std::vector<double>> p, std::span<const std::optional<std::size_t>> q,
                      std::size_t* clamps) {
  if (p.size() != q.size()) throw Error(ErrorCode::shape_mismatch, "direction_loss: p and q differ in length");
  double loss = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (!q[t]) continue;
    if (*q[t] >= p[t].size()) throw Error(ErrorCode::invalid_argument, "direction_loss: label out of range");
    loss += -clamped_log(p[t][*q[t]], clamps);
  }
  return loss;
}

double stop_loss(std::span<const std::array<double, 2>> s, std::span<const int> o, double lambda, std::size_t* clamps) {
  if (s.size() != o.size()) throw Error(ErrorCode::shape_mismatch, "stop_loss: s and o differ in length");
  double loss = 0.0;
  for (std::size_t t = 0; t < s.size(); ++t) {
    const double ot = o[t];
    // Zero-weight terms are skipped so they cannot register a clamp.
    double term = 0.0;
    if (ot != 0.0) term += -ot * clamped_log(s[t][0], clamps);
    if (lambda * (1.0 - ot) != 0.0) term -= lambda * (1.0 - ot) * clamped_log(s[t][1], clamps);
    loss += term;
  }
  return loss;
}

double cross_entropy(std::span<const std::array<double, 2>> s, std::span<const std::size_t> labels,
                     std::size_t* clamps) {
  if (s.size() != labels.size()) throw Error(ErrorCode::shape_mismatch, "cross_entropy: length mismatch");
  double loss = 0.0;
  for (std::size_t t = 0; t < s.size(); ++t) loss += -clamped_log(s[t][labels[t]], clamps);
  return loss;
}

double total_loss(double l_dir, double l_stop, double gamma) { return gamma * l_dir + (1.0 - gamma) * l_stop; }

}  // namespace stopnav::training
