#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace uvrec {

// Complex H x W grid stored as separate real and imaginary planes, row-major.
// Visibility grids are centered: the zero frequency sits at (H/2, W/2).
struct ComplexGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> re;
  std::vector<double> im;

  ComplexGrid() = default;
  ComplexGrid(std::size_t h, std::size_t w) : height(h), width(w), re(h * w, 0.0), im(h * w, 0.0) {}

  std::size_t size() const { return height * width; }
  std::complex<double> at(std::size_t row, std::size_t col) const {
    return {re[row * width + col], im[row * width + col]};
  }
  void set(std::size_t row, std::size_t col, std::complex<double> v) {
    re[row * width + col] = v.real();
    im[row * width + col] = v.imag();
  }
};

// Real H x W grid, row-major.
struct RealGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  RealGrid() = default;
  RealGrid(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w, fill) {}

  std::size_t size() const { return height * width; }
  double& operator()(std::size_t row, std::size_t col) { return values[row * width + col]; }
  double operator()(std::size_t row, std::size_t col) const { return values[row * width + col]; }
};

bool is_power_of_two(std::size_t n);

// Centered unitary transforms: forward kernel exp(-2 pi i (u l + v m)),
// inverse exp(+2 pi i ...), each scaled by 1/sqrt(HW). Both sides of the
// transform use centered coordinates. Sizes must be powers of two.
ComplexGrid fft2(const ComplexGrid& grid);
ComplexGrid fft2(const RealGrid& image);
ComplexGrid ifft2(const ComplexGrid& grid);

ComplexGrid to_complex(const RealGrid& image);
RealGrid real_part(const ComplexGrid& grid);

}  // namespace uvrec
