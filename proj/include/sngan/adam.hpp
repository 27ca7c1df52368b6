#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sngan/layers.hpp"

namespace sngan::nn {

struct AdamParams {
  float learning_rate = 2e-4f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Raised before any parameter is touched when a gradient holds NaN or Inf.
class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(std::string parameter)
      : std::runtime_error("non-finite gradient for parameter " + parameter),
        parameter_(std::move(parameter)) {}
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

struct AdamState {
  AdamParams params;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every parameter that has a gradient.
/// Parameters are updated in place through their leaf values.
void adam_step(AdamState& state, const std::vector<Parameter>& params, const GradientMap& grads);

}  // namespace sngan::nn
