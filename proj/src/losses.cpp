#include "decor/losses.hpp"

#include <string>

#include "decor/errors.hpp"
#include "decor/tensor_ops.hpp"

namespace decor {
namespace {

double mask_norm(const ad::Tensor& mask, const char* what) {
  double n = 0.0;
  for (float v : mask.data()) n += v;
  if (n <= 0.0) throw DegenerateSampleError(std::string(what) + " mask is all zero");
  return n;
}

void check_style(const ad::Tensor& scores, int style) {
  if (scores.rank() != 4 || style < 0 || style + 1 >= scores.dim(0)) {
    throw ShapeError("style " + std::to_string(style) + " has no branch in scores " + ad::to_string(scores.shape()));
  }
}

ad::Tensor target_like(const ad::Tensor& mask, float value) { return ad::Tensor::full(mask.shape(), value); }

}  // namespace

DiscriminatorLoss loss_discriminator(const ad::Tensor& real_scores, const ad::Tensor& fake_scores, int style,
                                     const ad::Tensor& real_mask, const ad::Tensor& fake_mask) {
  check_style(real_scores, style);
  check_style(fake_scores, style);
  const double n_real = mask_norm(real_mask, "real discriminator");
  const double n_fake = mask_norm(fake_mask, "fake discriminator");
  const auto ones = target_like(real_mask, 1.0f);
  const auto zeros = target_like(fake_mask, 0.0f);
  DiscriminatorLoss l;
  l.global_real = ad::masked_mse(ad::select_channel(real_scores, 0), ones, real_mask, n_real);
  l.style_real = ad::masked_mse(ad::select_channel(real_scores, style + 1), ones, real_mask, n_real);
  l.global_fake = ad::masked_mse(ad::select_channel(fake_scores, 0), zeros, fake_mask, n_fake);
  l.style_fake = ad::masked_mse(ad::select_channel(fake_scores, style + 1), zeros, fake_mask, n_fake);
  l.total = ad::add(ad::add(l.global_real, l.style_real), ad::add(l.global_fake, l.style_fake));
  return l;
}

GeneratorGanLoss loss_generator_gan(const ad::Tensor& fake_scores, int style, const ad::Tensor& fake_mask,
                                    double alpha) {
  check_style(fake_scores, style);
  if (alpha < 0.0) throw ParameterError("alpha must be non-negative");
  const double n = mask_norm(fake_mask, "fake discriminator");
  const auto ones = target_like(fake_mask, 1.0f);
  GeneratorGanLoss l;
  l.global = ad::masked_mse(ad::select_channel(fake_scores, 0), ones, fake_mask, n);
  l.style = ad::masked_mse(ad::select_channel(fake_scores, style + 1), ones, fake_mask, n);
  l.total = ad::add(l.global, ad::scale(l.style, static_cast<float>(alpha)));
  return l;
}

ad::Tensor loss_reconstruction(const ad::Tensor& masked_output, const ad::Tensor& target) {
  if (masked_output.shape() != target.shape()) {
    throw DimensionError("reconstruction output " + ad::to_string(masked_output.shape()) + " vs target " +
                         ad::to_string(target.shape()));
  }
  const auto ones = target_like(target, 1.0f);
  return ad::masked_mse(masked_output, target, ones, static_cast<double>(target.numel()));
}

ad::Tensor loss_generator_total(const ad::Tensor& gan, const ad::Tensor& recon, double beta) {
  if (beta < 0.0) throw ParameterError("beta must be non-negative");
  return ad::add(gan, ad::scale(recon, static_cast<float>(beta)));
}

ad::Tensor loss_outside_mask(const ad::Tensor& raw, const ad::Tensor& loose_mask, double lambda) {
  if (raw.shape() != loose_mask.shape()) throw DimensionError("penalty mask does not match the generator output");
  std::vector<float> outside(loose_mask.numel());
  const auto m = loose_mask.data();
  for (std::size_t i = 0; i < outside.size(); ++i) outside[i] = 1.0f - m[i];
  const auto zeros = target_like(raw, 0.0f);
  const auto term = ad::masked_mse(raw, zeros, ad::Tensor::from(raw.shape(), std::move(outside)),
                                   static_cast<double>(raw.numel()));
  return ad::scale(term, static_cast<float>(lambda));
}

}  // namespace decor
