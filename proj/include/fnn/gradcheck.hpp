#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fnn/autodiff.hpp"
#include "fnn/network.hpp"

namespace fnn {

inline constexpr double kGradCheckStep = 1e-6;
inline constexpr double kGradCheckTolerance = 1e-5;
/// Denominator floor of relative_error; below it the error is effectively absolute.
inline constexpr double kGradCheckScaleFloor = 1e-3;

/// |a - n| / max(|a|, |n|, kGradCheckScaleFloor).
double relative_error(double analytic, double numeric);

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  double max_rel_error() const;
  bool passed(double tol = kGradCheckTolerance) const { return max_rel_error() < tol; }
};

/// Builds a scalar on `tape` from one leaf per checked input.
using Objective = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

/// Compares reverse-mode gradients of `objective` with central differences of
/// step h, one entry per named input.
GradCheckReport check_gradients(const Objective& objective, const std::vector<Tensor>& inputs,
                                const std::vector<std::string>& names, double h = kGradCheckStep);

/// Checks every seed of a freshly built network under the NLL loss on a random
/// batch drawn from `seed`.
GradCheckReport gradcheck_network(const NetworkSpec& spec, std::uint64_t seed, std::size_t batch = 2);

/// Small networks that together exercise every layer type, both divergences
/// and both links.
std::vector<std::pair<std::string, NetworkSpec>> gradcheck_suite();

}  // namespace fnn
