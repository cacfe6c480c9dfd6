#include "decor/adam.hpp"

#include <cmath>
#include <unordered_map>

#include "decor/errors.hpp"

namespace decor::ad {

Adam::Adam(std::vector<NamedTensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p.tensor.defined()) throw ShapeError("Adam given an undefined parameter '" + p.name + "'");
    m_.emplace_back(p.tensor.numel(), 0.0f);
    v_.emplace_back(p.tensor.numel(), 0.0f);
  }
}

void Adam::step() {
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k].tensor;
    auto value = p.mutable_data();
    const bool has = p.has_grad();
    const auto grad = p.grad();
    if (grad.size() != value.size()) throw ShapeError("grad/param size mismatch for '" + params_[k].name + "'");
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = has ? grad[i] : 0.0;
      m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * g);
      v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * g * g);
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      value[i] = static_cast<float>(value[i] - options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps));
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<NamedTensor> Adam::state_tensors(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  out.reserve(2 * params_.size() + 1);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    out.push_back({prefix + "m/" + params_[k].name, Tensor::from(params_[k].tensor.shape(), m_[k])});
    out.push_back({prefix + "v/" + params_[k].name, Tensor::from(params_[k].tensor.shape(), v_[k])});
  }
  // Stored as two f32 halves so the counter survives beyond 2^24 steps.
  const auto lo = static_cast<float>(step_ % (1 << 20));
  const auto hi = static_cast<float>(step_ >> 20);
  out.push_back({prefix + "step", Tensor::from({2}, {lo, hi})});
  return out;
}

void Adam::load_state(const std::vector<NamedTensor>& tensors, const std::string& prefix) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.tensor;
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks optimizer tensor '" + name + "'");
    if (it->second->shape() != shape) throw FormatError("optimizer tensor '" + name + "' has wrong shape");
    return *it->second;
  };
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto& shape = params_[k].tensor.shape();
    const auto m = fetch(prefix + "m/" + params_[k].name, shape).data();
    const auto v = fetch(prefix + "v/" + params_[k].name, shape).data();
    m_[k].assign(m.begin(), m.end());
    v_[k].assign(v.begin(), v.end());
  }
  const auto s = fetch(prefix + "step", {2}).data();
  step_ = static_cast<long long>(s[0]) + (static_cast<long long>(s[1]) << 20);
}

}  // namespace decor::ad
