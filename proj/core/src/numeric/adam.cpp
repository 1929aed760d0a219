#include "stopnav/numeric/adam.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "stopnav/error.hpp"

namespace stopnav::numeric {

void validate(const AdamConfig& config) {
  if (!(config.learning_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "adam: learning rate must be positive");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "adam: betas must lie in [0, 1)");
  }
  if (!(config.epsilon >= 0.0)) throw Error(ErrorCode::invalid_argument, "adam: epsilon must be nonnegative");
}

void adam_step(ParamStore& params, std::span<const std::span<const double>> grads, const AdamConfig& config) {
  validate(config);
  if (grads.size() != params.size()) {
    throw Error(ErrorCode::shape_mismatch, "adam: got " + std::to_string(grads.size()) + " gradients for " +
                                               std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].empty() && grads[i].size() != params.entry(i).value.size()) {
      throw Error(ErrorCode::shape_mismatch, "adam: gradient for '" + params.entry(i).name + "' has wrong size");
    }
  }

  params.advance_step();
  const auto t = static_cast<double>(params.step());
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entry(i);
    auto value = e.value.data();
    auto m = e.first_moment.data();
    auto v = e.second_moment.data();
    const auto g = grads[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * gj;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * gj * gj;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

void adam_step(ParamStore& params, const Gradients& grads, const AdamConfig& config) {
  std::vector<std::span<const double>> ordered(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = grads.find(params.entry(i).name);
    if (it != grads.end()) {
      if (it->second.shape() != params.entry(i).value.shape()) {
        throw Error(ErrorCode::shape_mismatch, "adam: gradient for '" + it->first + "' is " +
                                                   shape_string(it->second.shape()) + ", parameter is " +
                                                   shape_string(params.entry(i).value.shape()));
      }
      ordered[i] = it->second.data();
    }
  }
  adam_step(params, ordered, config);
}

}  // namespace stopnav::numeric
