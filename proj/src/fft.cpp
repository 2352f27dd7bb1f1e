#include "fft.hpp"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <unordered_map>
#include <vector>

namespace freqshort::detail {
namespace {

using cd = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

struct Radix2Plan {
  std::vector<std::size_t> bitrev;
  std::vector<cd> twiddle;  // exp(-2*pi*i*k/n), k < n/2

  explicit Radix2Plan(std::size_t n) : bitrev(n), twiddle(n / 2) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) {
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      }
      bitrev[i] = r;
    }
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle[k] = {std::cos(angle), std::sin(angle)};
    }
  }

  void run(std::span<cd> a, bool inverse) const {
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (i < bitrev[i]) std::swap(a[i], a[bitrev[i]]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n / len;
      for (std::size_t start = 0; start < n; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          cd w = twiddle[k * step];
          if (inverse) w = std::conj(w);
          const cd t = w * a[start + k + half];
          a[start + k + half] = a[start + k] - t;
          a[start + k] += t;
        }
      }
    }
  }
};

struct BluesteinPlan {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<cd> chirp;         // exp(-i*pi*k^2/n)
  std::vector<cd> kernel_fft;    // FFT of conj(chirp), wrapped to length m
  const Radix2Plan* inner = nullptr;

  BluesteinPlan(std::size_t len, const Radix2Plan& plan, std::size_t padded)
      : n(len), m(padded), chirp(len), kernel_fft(padded), inner(&plan) {
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the angle argument small and exact.
      const std::size_t k2 = (k * k) % (2 * n);
      const double angle = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
      chirp[k] = {std::cos(angle), std::sin(angle)};
    }
    kernel_fft[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
      kernel_fft[k] = std::conj(chirp[k]);
      kernel_fft[m - k] = std::conj(chirp[k]);
    }
    inner->run(kernel_fft, false);
  }

  void run(std::span<cd> a, bool inverse) const {
    // The inverse transform is conj(F(conj(x))).
    std::vector<cd> work(m);
    for (std::size_t k = 0; k < n; ++k) {
      const cd x = inverse ? std::conj(a[k]) : a[k];
      work[k] = x * chirp[k];
    }
    inner->run(work, false);
    for (std::size_t k = 0; k < m; ++k) work[k] *= kernel_fft[k];
    inner->run(work, true);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) {
      const cd y = work[k] * scale * chirp[k];
      a[k] = inverse ? std::conj(y) : y;
    }
  }
};

const Radix2Plan& radix2_plan(std::size_t n) {
  thread_local std::unordered_map<std::size_t, Radix2Plan> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, Radix2Plan(n)).first;
  return it->second;
}

const BluesteinPlan& bluestein_plan(std::size_t n) {
  thread_local std::unordered_map<std::size_t, BluesteinPlan> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    it = cache.emplace(n, BluesteinPlan(n, radix2_plan(m), m)).first;
  }
  return it->second;
}

}  // namespace

void fft_inplace(std::span<std::complex<double>> data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  if (is_pow2(n)) {
    radix2_plan(n).run(data, inverse);
  } else {
    bluestein_plan(n).run(data, inverse);
  }
}

}  // namespace freqshort::detail
