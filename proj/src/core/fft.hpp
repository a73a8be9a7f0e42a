#pragma once

#include <complex>
#include <vector>

namespace svc {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a);

bool is_power_of_two(long n);

}  // namespace svc
