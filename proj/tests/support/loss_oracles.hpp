#pragma once

// f64 recomputation of the discriminator, generator and reconstruction losses.

#include <algorithm>
#include <cmath>
#include <random>

#include "decor/losses.hpp"
#include "decor/tensor_ops.hpp"

namespace decor::oracle {

inline double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-30); }

struct ScoreCase {
  int n_styles, style, d, h, w;
  ad::Tensor real, fake, real_mask, fake_mask;
};

inline ad::Tensor uniform(const ad::Shape& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(ad::numel(s));
  for (auto& x : v) x = u(rng);
  return ad::Tensor::from(s, std::move(v));
}

inline ad::Tensor random_mask(const ad::Shape& s, std::mt19937_64& rng) {
  std::bernoulli_distribution bit(0.5);
  std::vector<float> v(ad::numel(s));
  for (auto& x : v) x = bit(rng) ? 1.0f : 0.0f;
  v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)] = 1.0f;
  return ad::Tensor::from(s, std::move(v));
}

inline ScoreCase random_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(1, 5), ns(1, 4);
  ScoreCase c;
  c.n_styles = ns(rng);
  c.style = std::uniform_int_distribution<int>(0, c.n_styles - 1)(rng);
  c.d = dim(rng), c.h = dim(rng), c.w = dim(rng);
  c.real = uniform({c.n_styles + 1, c.d, c.h, c.w}, rng);
  c.fake = uniform({c.n_styles + 1, c.d, c.h, c.w}, rng);
  c.real_mask = random_mask({1, c.d, c.h, c.w}, rng);
  c.fake_mask = random_mask({1, c.d, c.h, c.w}, rng);
  return c;
}

// sum over masked cells of (score[ch] - target)^2 / sum(mask), all in f64.
inline double term(const ad::Tensor& scores, int ch, const ad::Tensor& mask, double target) {
  const std::size_t vol = mask.numel();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < vol; ++i) {
    const double m = mask.data()[i];
    const double e = (static_cast<double>(scores.data()[ch * vol + i]) - target) * m;
    num += e * e;
    den += m;
  }
  return num / den;
}

// Worst relative error of every loss term against an f64 recomputation over
// `trials` random score maps, masks, alphas and betas.
inline double loss_fidelity(std::mt19937_64& rng, int trials) {
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const auto c = random_case(rng);
    const double alpha = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    const double beta = std::uniform_real_distribution<double>(0.0, 20.0)(rng);
    const float alpha_f = static_cast<float>(alpha), beta_f = static_cast<float>(beta);

    const auto ld = loss_discriminator(c.real, c.fake, c.style, c.real_mask, c.fake_mask);
    const double gr = term(c.real, 0, c.real_mask, 1.0), sr = term(c.real, c.style + 1, c.real_mask, 1.0);
    const double gf = term(c.fake, 0, c.fake_mask, 0.0), sf = term(c.fake, c.style + 1, c.fake_mask, 0.0);
    worst = std::max({worst, rel(ld.global_real.item(), gr), rel(ld.style_real.item(), sr),
                      rel(ld.global_fake.item(), gf), rel(ld.style_fake.item(), sf),
                      rel(ld.total.item(), gr + sr + gf + sf)});

    const auto lg = loss_generator_gan(c.fake, c.style, c.fake_mask, alpha);
    const double gg = term(c.fake, 0, c.fake_mask, 1.0), gs = term(c.fake, c.style + 1, c.fake_mask, 1.0);
    const double gan = gg + double(alpha_f) * gs;
    worst = std::max({worst, rel(lg.global.item(), gg), rel(lg.style.item(), gs), rel(lg.total.item(), gan)});

    // Reconstruction: pred = uniform field times a mask, target = uniform field.
    const ad::Shape s{1, 4 * c.d, 4 * c.h, 4 * c.w};
    const auto mask = random_mask(s, rng);
    const auto raw = uniform(s, rng);
    const auto target = uniform(s, rng);
    const auto masked = ad::mul(raw, mask);
    const auto lr = loss_reconstruction(masked, target);
    double acc = 0.0;
    for (std::size_t i = 0; i < target.numel(); ++i) {
      const double e = double(raw.data()[i]) * mask.data()[i] - target.data()[i];
      acc += e * e;
    }
    const double recon = acc / static_cast<double>(target.numel());
    worst = std::max(worst, rel(lr.item(), recon));

    const auto total = loss_generator_total(lg.total, lr, beta);
    worst = std::max(worst, rel(total.item(), gan + double(beta_f) * recon));

    const auto pen = loss_outside_mask(raw, mask, 10.0);
    double out = 0.0;
    for (std::size_t i = 0; i < raw.numel(); ++i) {
      const double e = double(raw.data()[i]) * (1.0 - mask.data()[i]);
      out += e * e;
    }
    worst = std::max(worst, rel(pen.item(), 10.0 * out / double(raw.numel())));
  }
  return worst;
}

}  // namespace decor::oracle
