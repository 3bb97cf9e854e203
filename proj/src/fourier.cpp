#include "uvrec/fourier.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace uvrec {

namespace {

using cd = std::complex<double>;

void require_pow2(std::size_t h, std::size_t w) {
  if (!is_power_of_two(h) || !is_power_of_two(w)) {
    throw std::invalid_argument("fft2: grid " + std::to_string(h) + "x" + std::to_string(w) +
                                " is not a power of two in both dimensions");
  }
}

// In-place iterative radix-2 transform, unnormalized.
void fft1d(std::vector<cd>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    std::vector<cd> twiddle(half);
    for (std::size_t k = 0; k < half; ++k) {
      twiddle[k] = std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                                       static_cast<double>(len));
    }
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cd u = a[start + k];
        const cd v = a[start + k + half] * twiddle[k];
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

// Centered layout -> standard layout is a half-size cyclic shift for even
// sizes, and the same shift maps back.
ComplexGrid transform(const ComplexGrid& in, bool inverse) {
  require_pow2(in.height, in.width);
  const std::size_t h = in.height, w = in.width;
  const std::size_t hc = h / 2, wc = w / 2;
  std::vector<cd> work(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      work[((r + hc) % h) * w + (c + wc) % w] = in.at(r, c);
    }
  }
  std::vector<cd> line(w);
  for (std::size_t r = 0; r < h; ++r) {
    std::copy_n(work.begin() + static_cast<std::ptrdiff_t>(r * w), w, line.begin());
    fft1d(line, inverse);
    std::copy(line.begin(), line.end(), work.begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  line.resize(h);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) line[r] = work[r * w + c];
    fft1d(line, inverse);
    for (std::size_t r = 0; r < h; ++r) work[r * w + c] = line[r];
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
  ComplexGrid out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      out.set((r + hc) % h, (c + wc) % w, work[r * w + c] * norm);
    }
  }
  return out;
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

ComplexGrid fft2(const ComplexGrid& grid) { return transform(grid, false); }

ComplexGrid fft2(const RealGrid& image) { return transform(to_complex(image), false); }

ComplexGrid ifft2(const ComplexGrid& grid) { return transform(grid, true); }

ComplexGrid to_complex(const RealGrid& image) {
  ComplexGrid out(image.height, image.width);
  out.re = image.values;
  return out;
}

RealGrid real_part(const ComplexGrid& grid) {
  RealGrid out(grid.height, grid.width);
  out.values = grid.re;
  return out;
}

}  // namespace uvrec
