#pragma once

#include <complex>
#include <vector>

namespace picore::fft {

constexpr int kForward = -1;  ///< e^{-2pi i jk/n}, unnormalized
constexpr int kBackward = +1; ///< e^{+2pi i jk/n}, unnormalized

/// 1D complex transform, out-of-place allowed (in == out also allowed).
void transform_1d(const std::complex<double>* in, std::complex<double>* out,
                  int n, int sign);

/// 2D complex transform on a row-major n0 x n1 array.
void transform_2d(const std::complex<double>* in, std::complex<double>* out,
                  int n0, int n1, int sign);

/// Forward transform of a real signal; returns the full complex spectrum.
std::vector<std::complex<double>> forward_real_1d(const double* in, int n);
std::vector<std::complex<double>> forward_real_2d(const double* in, int n0, int n1);

/// Real part of the unnormalized backward transform, divided by n (true inverse).
std::vector<double> inverse_to_real_1d(const std::complex<double>* spectrum, int n);
std::vector<double> inverse_to_real_2d(const std::complex<double>* spectrum, int n0, int n1);

/// Signed integer frequency of bin k for length n: 0..n/2-1, then -n/2..-1.
inline int freq(int k, int n) { return (k <= (n - 1) / 2) ? k : k - n; }

}  // namespace picore::fft
