#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace stopnav::training {

struct LossConfig {
  double lambda = 20.0;  // weight of the stop step in the stop loss
  double gamma = 0.6;    // weight of the direction loss in the total
};

void validate(const LossConfig& config);

inline constexpr double kLogEpsilon = 1e-12;

/// log(max(x, eps)); bumps `clamps` when the floor is used.
double clamped_log(double x, std::size_t* clamps = nullptr);

/// -sum_t log p_t[q_t] over steps where q_t is set.
double direction_loss(std::span<const std::vector<double>> p, std::span<const std::optional<std::size_t>> q,
                      std::size_t* clamps = nullptr);

/// sum_t [ -o_t log s_t[0] - lambda (1 - o_t) log s_t[1] ], o_t = 1 means
/// continue.
double stop_loss(std::span<const std::array<double, 2>> s, std::span<const int> o, double lambda,
                 std::size_t* clamps = nullptr);

/// Plain two-class cross-entropy -sum_t log s_t[label_t].
double cross_entropy(std::span<const std::array<double, 2>> s, std::span<const std::size_t> labels,
                     std::size_t* clamps = nullptr);

/// gamma L_dir + (1 - gamma) L_stop.
double total_loss(double l_dir, double l_stop, double gamma);

}  // namespace stopnav::training
