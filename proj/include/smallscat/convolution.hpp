#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include "smallscat/grid.hpp"

namespace smallscat {

/// Applies translation-invariant kernels K(x_i - x_j) to per-cell fields of a
/// uniform grid by zero-padded FFT convolution. Kernel spectra are computed
/// once; a matvec costs one forward transform per input field and one inverse
/// transform per output field, with multiply-accumulates in between.
class GridConvolution {
public:
  using Complex = std::complex<double>;
  /// Kernel value at lattice offset v = x_target - x_source. Called once with
  /// v = 0, where the sampler must return the regularized self value.
  using KernelFn = std::function<Complex(const Vec3& offset)>;

  GridConvolution(const Grid3& grid, int field_slots, int output_slots);
  ~GridConvolution();
  GridConvolution(const GridConvolution&) = delete;
  GridConvolution& operator=(const GridConvolution&) = delete;

  int add_kernel(const KernelFn& kernel);

  void load_field(int field_slot, const Complex* field);
  void clear_outputs();
  /// spectrum(out) += scale * spectrum(kernel) * spectrum(field)
  void multiply_accumulate(int kernel_id, int field_slot, Complex scale,
                           int output_slot);
  /// Inverse transform of an output slot, cropped to the grid cells.
  void extract(int output_slot, Complex* out);

  std::size_t cell_count() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace smallscat
