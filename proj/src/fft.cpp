#include "qlpair/fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "qlpair/error.hpp"

namespace qlp {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void fft(std::vector<Complex>& a, bool inverse) {
    const int n = static_cast<int>(a.size());
    if (!is_power_of_two(n)) {
        throw Error(ErrorKind::InvalidArgument, "fft length must be a power of two");
    }
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len / 2;
        std::vector<Complex> w(half);
        for (int k = 0; k < half; ++k) {
            const double ang = sign * 2.0 * std::numbers::pi * k / len;
            w[k] = Complex(std::cos(ang), std::sin(ang));
        }
        for (int i = 0; i < n; i += len) {
            for (int k = 0; k < half; ++k) {
                const Complex u = a[i + k];
                const Complex v = a[i + k + half] * w[k];
                a[i + k] = u + v;
                a[i + k + half] = u - v;
            }
        }
    }
    if (inverse) {
        for (auto& z : a) z /= static_cast<double>(n);
    }
}

std::vector<double> wavenumbers(int n, double h) {
    std::vector<double> k(n);
    const double base = 2.0 * std::numbers::pi / (n * h);
    for (int j = 0; j < n; ++j) k[j] = base * (j <= n / 2 ? j : j - n);
    // the Nyquist mode has no sign; zero it so odd derivatives stay real
    if (n % 2 == 0) k[n / 2] = 0.0;
    return k;
}

}  // namespace qlp
