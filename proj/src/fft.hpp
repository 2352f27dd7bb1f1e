#pragma once

#include <complex>
#include <span>

namespace freqshort::detail {

/// In-place unnormalized 1D DFT of arbitrary length. Powers of two use an
/// iterative radix-2 kernel; other lengths go through Bluestein's chirp-z.
void fft_inplace(std::span<std::complex<double>> data, bool inverse);

}  // namespace freqshort::detail
