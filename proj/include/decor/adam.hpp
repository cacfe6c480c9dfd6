#pragma once

#include <string>
#include <vector>

#include "decor/tensor.hpp"

namespace decor::ad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct AdamOptions {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Bias-corrected Adam over a fixed parameter list. Moments are stored per
// parameter and keep the parameter's shape.
class Adam {
 public:
  Adam(std::vector<NamedTensor> params, AdamOptions options = {});

  // Applies one update from the parameters' accumulated grads (a parameter
  // with no grad is treated as having a zero grad).
  void step();
  void zero_grad();

  long long step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<NamedTensor>& params() const { return params_; }

  // State as named tensors: "<prefix>m/<param>", "<prefix>v/<param>", "<prefix>step".
  std::vector<NamedTensor> state_tensors(const std::string& prefix) const;
  // Restores state written by state_tensors; throws FormatError on mismatch.
  void load_state(const std::vector<NamedTensor>& tensors, const std::string& prefix);

 private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  AdamOptions options_;
  long long step_ = 0;
};

}  // namespace decor::ad
