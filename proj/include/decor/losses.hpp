#pragma once

#include "decor/tensor.hpp"

namespace decor {

// Scores are discriminator outputs [N+1, d, h, w]; channel 0 is the global
// branch, channel style+1 the branch of the sampled style. Masks are
// [1, d, h, w] binary tensors; each term is normalised by its mask's L1 norm.
// An all-zero mask throws DegenerateSampleError.

struct DiscriminatorLoss {
  ad::Tensor global_real;
  ad::Tensor style_real;
  ad::Tensor global_fake;
  ad::Tensor style_fake;
  ad::Tensor total;  // sum of the four terms
};

DiscriminatorLoss loss_discriminator(const ad::Tensor& real_scores, const ad::Tensor& fake_scores, int style,
                                     const ad::Tensor& real_mask, const ad::Tensor& fake_mask);

struct GeneratorGanLoss {
  ad::Tensor global;
  ad::Tensor style;
  ad::Tensor total;  // global + alpha * style
};

GeneratorGanLoss loss_generator_gan(const ad::Tensor& fake_scores, int style, const ad::Tensor& fake_mask,
                                    double alpha);

// ||masked_output - target||^2 / |target|, where |target| is the voxel count.
ad::Tensor loss_reconstruction(const ad::Tensor& masked_output, const ad::Tensor& target);

// L_GAN + beta * L_recon
ad::Tensor loss_generator_total(const ad::Tensor& gan, const ad::Tensor& recon, double beta);

// ||raw o (1 - loose_mask)||^2 / |raw|, scaled by lambda.
ad::Tensor loss_outside_mask(const ad::Tensor& raw, const ad::Tensor& loose_mask, double lambda);

}  // namespace decor
