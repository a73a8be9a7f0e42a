#pragma once

#include <functional>
#include <string>

#include "core/dsp.hpp"
#include "core/tensor.hpp"

namespace svc {

struct LossWeights {
  double alpha = 4.0;  // adversarial
  double beta = 1.0;   // pitch perceptual
  double gamma = 10.0; // phonetic perceptual
};

struct PerceptualExtractor {
  std::string id;
  std::function<ad::Tensor(const ad::Tensor&)> map;  // [1, T] -> activations
};

// Differentiable log-mel stack (the phonetic activation map).
PerceptualExtractor make_phonetic_extractor(int sample_rate);
// Differentiable framed normalized autocorrelation over the 80-600 Hz lag
// range (the pitch activation map).
PerceptualExtractor make_pitch_extractor(int sample_rate);

// mean_t (1 - d_real)^2 + mean_t d_fake^2
ad::Tensor lsgan_d_loss(const ad::Tensor& d_real, const ad::Tensor& d_fake);
// mean_t (1 - d_fake)^2
ad::Tensor lsgan_adv_loss(const ad::Tensor& d_fake);

// ||S - S_hat||_F / ||S||_F + ||log S - log S_hat||_1 / N at one FFT size,
// hop = m/4, Hann window. A zero-energy reference is an error.
ad::Tensor spectral_distance(const ad::Tensor& x, const ad::Tensor& x_hat, long fft_size);

// mean of spectral_distance over the scale set
ad::Tensor multires_recon(const ad::Tensor& x, const ad::Tensor& x_hat,
                          const SpectralScaleSet& scales);

ad::Tensor perceptual_loss(const PerceptualExtractor& e, const ad::Tensor& x,
                           const ad::Tensor& x_hat);

// recon + alpha*adv + beta*pitch + gamma*phon; undefined terms contribute 0
struct GeneratorLossTerms {
  ad::Tensor recon, adv, pitch_perc, phon_perc;
};
ad::Tensor generator_total(const GeneratorLossTerms& t, const LossWeights& w);

// alpha*adv + beta*pitch + gamma*phon (no reconstruction target)
ad::Tensor unaligned_generator_loss(const ad::Tensor& adv, const ad::Tensor& pitch_perc,
                                    const ad::Tensor& phon_perc, const LossWeights& w);

struct RegimeTerms {
  ad::Tensor d_loss, g_loss;
};
// sums the supervised, unaligned and virtual-sample contributions
std::pair<ad::Tensor, ad::Tensor> multi_singer_totals(const RegimeTerms& aligned,
                                                      const RegimeTerms& unaligned,
                                                      const RegimeTerms& mixup);

}  // namespace svc
