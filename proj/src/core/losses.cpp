#include "core/losses.hpp"

#include <cmath>

namespace svc {

namespace {

ad::Tensor square(const ad::Tensor& a) { return ad::mul(a, a); }

}  // namespace

PerceptualExtractor make_phonetic_extractor(int sample_rate) {
  constexpr long kFft = 1024;
  constexpr long kHop = 256;
  const auto bank = mel_filterbank(kMelBands, kFft, sample_rate);
  std::vector<double> flat;
  flat.reserve(size_t(kMelBands) * size_t(kFft / 2 + 1));
  for (const auto& row : bank) flat.insert(flat.end(), row.begin(), row.end());

  PerceptualExtractor e;
  e.id = kMelProviderId;
  e.map = [flat](const ad::Tensor& x) {
    ad::Tensor mag = ad::dft_magnitude(x, kFft, kHop);
    ad::Tensor power = ad::mul(mag, mag);
    ad::Tensor mel = ad::channel_matmul_const(power, flat, kMelBands);
    return ad::log_eps(mel, Real(kLogFloor));
  };
  return e;
}

PerceptualExtractor make_pitch_extractor(int sample_rate) {
  constexpr long kFrame = 1024;
  constexpr long kHop = 256;
  const long lag_min = std::max(1l, long(sample_rate / 600.0));
  const long lag_max = long(std::ceil(sample_rate / 80.0));

  PerceptualExtractor e;
  e.id = "autocorr-v1";
  e.map = [lag_min, lag_max](const ad::Tensor& x) {
    return ad::framed_norm_autocorr(x, kFrame, kHop, lag_min, lag_max);
  };
  return e;
}

ad::Tensor lsgan_d_loss(const ad::Tensor& d_real, const ad::Tensor& d_fake) {
  SVC_CHECK(d_real.defined() && d_real.numel() >= 1, ErrorCode::InvalidArgument,
            "empty real scores");
  SVC_CHECK(d_fake.defined() && d_fake.numel() >= 1, ErrorCode::InvalidArgument,
            "empty fake scores");
  ad::Tensor real_term = ad::mean(square(ad::add_const(ad::neg(d_real), Real(1))));
  ad::Tensor fake_term = ad::mean(square(d_fake));
  return ad::add(real_term, fake_term);
}

ad::Tensor lsgan_adv_loss(const ad::Tensor& d_fake) {
  SVC_CHECK(d_fake.defined() && d_fake.numel() >= 1, ErrorCode::InvalidArgument,
            "empty fake scores");
  return ad::mean(square(ad::add_const(ad::neg(d_fake), Real(1))));
}

ad::Tensor spectral_distance(const ad::Tensor& x, const ad::Tensor& x_hat, long fft_size) {
  SVC_CHECK(x.shape() == x_hat.shape(), ErrorCode::InvalidArgument,
            "spectral_distance requires equal lengths");
  const long hop = fft_size / 4;
  ad::Tensor s_ref = ad::dft_magnitude(x, fft_size, hop);
  ad::Tensor s_hat = ad::dft_magnitude(x_hat, fft_size, hop);

  double ref_energy = 0.0;
  for (Real v : s_ref.data()) ref_energy += double(v) * double(v);
  const double ref_fro = std::sqrt(ref_energy);
  SVC_CHECK(ref_fro > 0.0, ErrorCode::InvalidArgument,
            "degenerate reference: zero-energy signal in spectral distance");

  ad::Tensor diff = ad::sub(s_ref, s_hat);
  ad::Tensor fro = ad::sqrt_guard(ad::sum(square(diff)), Real(1e-6));
  ad::Tensor term1 = ad::scale(fro, Real(1.0 / ref_fro));

  ad::Tensor log_diff = ad::abs_t(ad::sub(ad::log_eps(s_ref, Real(kLogFloor)),
                                          ad::log_eps(s_hat, Real(kLogFloor))));
  ad::Tensor term2 = ad::scale(ad::sum(log_diff), Real(1.0 / double(s_ref.numel())));
  return ad::add(term1, term2);
}

ad::Tensor multires_recon(const ad::Tensor& x, const ad::Tensor& x_hat,
                          const SpectralScaleSet& scales) {
  scales.validate();
  const long t_len = x.size(1);
  for (long m : scales.fft_sizes)
    SVC_CHECK(t_len >= m, ErrorCode::InvalidArgument,
              "signal length " << t_len << " shorter than scale " << m);
  ad::Tensor acc;
  for (long m : scales.fft_sizes) {
    ad::Tensor d = spectral_distance(x, x_hat, m);
    acc = acc.defined() ? ad::add(acc, d) : d;
  }
  return ad::scale(acc, Real(1.0 / double(scales.fft_sizes.size())));
}

ad::Tensor perceptual_loss(const PerceptualExtractor& e, const ad::Tensor& x,
                           const ad::Tensor& x_hat) {
  SVC_CHECK(x.shape() == x_hat.shape(), ErrorCode::InvalidArgument,
            "perceptual_loss requires equal lengths");
  ad::Tensor a = e.map(x);
  ad::Tensor b = e.map(x_hat);
  SVC_CHECK(a.shape() == b.shape(), ErrorCode::State,
            "extractor output shape mismatch for " << e.id);
  return ad::mean(ad::abs_t(ad::sub(a, b)));
}

ad::Tensor generator_total(const GeneratorLossTerms& t, const LossWeights& w) {
  SVC_CHECK(w.alpha >= 0 && w.beta >= 0 && w.gamma >= 0, ErrorCode::InvalidArgument,
            "loss weights must be nonnegative");
  ad::Tensor total = t.recon.defined() ? t.recon : ad::Tensor::scalar_value(0);
  if (t.adv.defined()) total = ad::add(total, ad::scale(t.adv, Real(w.alpha)));
  if (t.pitch_perc.defined()) total = ad::add(total, ad::scale(t.pitch_perc, Real(w.beta)));
  if (t.phon_perc.defined()) total = ad::add(total, ad::scale(t.phon_perc, Real(w.gamma)));
  return total;
}

ad::Tensor unaligned_generator_loss(const ad::Tensor& adv, const ad::Tensor& pitch_perc,
                                    const ad::Tensor& phon_perc, const LossWeights& w) {
  GeneratorLossTerms t;
  t.adv = adv;
  t.pitch_perc = pitch_perc;
  t.phon_perc = phon_perc;
  return generator_total(t, w);
}

std::pair<ad::Tensor, ad::Tensor> multi_singer_totals(const RegimeTerms& aligned,
                                                      const RegimeTerms& unaligned,
                                                      const RegimeTerms& mixup) {
  auto acc = [](const ad::Tensor& a, const ad::Tensor& b) {
    if (!a.defined()) return b;
    if (!b.defined()) return a;
    return ad::add(a, b);
  };
  ad::Tensor d = acc(acc(aligned.d_loss, unaligned.d_loss), mixup.d_loss);
  ad::Tensor g = acc(acc(aligned.g_loss, unaligned.g_loss), mixup.g_loss);
  if (!d.defined()) d = ad::Tensor::scalar_value(0);
  if (!g.defined()) g = ad::Tensor::scalar_value(0);
  return {d, g};
}

}  // namespace svc
