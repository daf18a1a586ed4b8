#pragma once

#include <complex>
#include <vector>

namespace qlp {

using Complex = std::complex<double>;

bool is_power_of_two(int n);

/// In-place iterative radix-2 transform. Forward uses e^{-2 pi i jk/n};
/// the inverse includes the 1/n factor.
void fft(std::vector<Complex>& data, bool inverse = false);

/// Angular wavenumbers matching fft output order for n samples at spacing h.
std::vector<double> wavenumbers(int n, double h);

}  // namespace qlp
