#include "smallscat/convolution.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

namespace smallscat {

namespace {

// FFTW's planner is not thread-safe; serialize plan creation/destruction.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct GridConvolution::Impl {
  Grid3 grid;
  int px, py, pz;           // padded dims, 2x the grid
  std::size_t padded_size;
  std::size_t cells;

  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  fftw_complex* work = nullptr;

  std::vector<fftw_complex*> kernels;  // spectra
  std::vector<fftw_complex*> fields;   // spectra
  std::vector<fftw_complex*> outputs;  // spectra, accumulated

  explicit Impl(const Grid3& g, int field_slots, int output_slots) : grid(g) {
    px = 2 * g.dims[0];
    py = 2 * g.dims[1];
    pz = 2 * g.dims[2];
    padded_size = static_cast<std::size_t>(px) * py * pz;
    cells = g.cell_count();
    work = fftw_alloc_complex(padded_size);
    {
      std::lock_guard<std::mutex> lock(planner_mutex());
      forward = fftw_plan_dft_3d(pz, py, px, work, work, FFTW_FORWARD,
                                 FFTW_ESTIMATE);
      backward = fftw_plan_dft_3d(pz, py, px, work, work, FFTW_BACKWARD,
                                  FFTW_ESTIMATE);
    }
    fields.resize(static_cast<std::size_t>(field_slots));
    for (auto& f : fields) f = fftw_alloc_complex(padded_size);
    outputs.resize(static_cast<std::size_t>(output_slots));
    for (auto& o : outputs) o = fftw_alloc_complex(padded_size);
  }

  ~Impl() {
    {
      std::lock_guard<std::mutex> lock(planner_mutex());
      if (forward) fftw_destroy_plan(forward);
      if (backward) fftw_destroy_plan(backward);
    }
    fftw_free(work);
    for (auto* k : kernels) fftw_free(k);
    for (auto* f : fields) fftw_free(f);
    for (auto* o : outputs) fftw_free(o);
  }

  std::size_t padded_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * py + j) * px + i;
  }
};

GridConvolution::GridConvolution(const Grid3& grid, int field_slots,
                                 int output_slots)
    : impl_(std::make_unique<Impl>(grid, field_slots, output_slots)) {}

GridConvolution::~GridConvolution() = default;

std::size_t GridConvolution::cell_count() const { return impl_->cells; }

int GridConvolution::add_kernel(const KernelFn& kernel) {
  Impl& s = *impl_;
  const Vec3 h = s.grid.spacing();
  std::memset(s.work, 0, sizeof(fftw_complex) * s.padded_size);
  for (int k = 0; k < s.pz; ++k) {
    const int dk = k < s.grid.dims[2] ? k : k - s.pz;
    for (int j = 0; j < s.py; ++j) {
      const int dj = j < s.grid.dims[1] ? j : j - s.py;
      for (int i = 0; i < s.px; ++i) {
        const int di = i < s.grid.dims[0] ? i : i - s.px;
        const Vec3 offset(di * h.x(), dj * h.y(), dk * h.z());
        const Complex v = kernel(offset);
        const std::size_t idx = s.padded_index(i, j, k);
        s.work[idx][0] = v.real();
        s.work[idx][1] = v.imag();
      }
    }
  }
  fftw_execute(s.forward);
  fftw_complex* spectrum = fftw_alloc_complex(s.padded_size);
  std::memcpy(spectrum, s.work, sizeof(fftw_complex) * s.padded_size);
  s.kernels.push_back(spectrum);
  return static_cast<int>(s.kernels.size()) - 1;
}

void GridConvolution::load_field(int field_slot, const Complex* field) {
  Impl& s = *impl_;
  std::memset(s.work, 0, sizeof(fftw_complex) * s.padded_size);
  for (int k = 0; k < s.grid.dims[2]; ++k)
    for (int j = 0; j < s.grid.dims[1]; ++j)
      for (int i = 0; i < s.grid.dims[0]; ++i) {
        const Complex v = field[s.grid.index(i, j, k)];
        const std::size_t idx = s.padded_index(i, j, k);
        s.work[idx][0] = v.real();
        s.work[idx][1] = v.imag();
      }
  fftw_execute(s.forward);
  std::memcpy(s.fields[static_cast<std::size_t>(field_slot)], s.work,
              sizeof(fftw_complex) * s.padded_size);
}

void GridConvolution::clear_outputs() {
  for (auto* o : impl_->outputs)
    std::memset(o, 0, sizeof(fftw_complex) * impl_->padded_size);
}

void GridConvolution::multiply_accumulate(int kernel_id, int field_slot,
                                          Complex scale, int output_slot) {
  Impl& s = *impl_;
  const fftw_complex* kc = s.kernels[static_cast<std::size_t>(kernel_id)];
  const fftw_complex* fc = s.fields[static_cast<std::size_t>(field_slot)];
  fftw_complex* oc = s.outputs[static_cast<std::size_t>(output_slot)];
  const double sr = scale.real(), si = scale.imag();
  for (std::size_t idx = 0; idx < s.padded_size; ++idx) {
    const double pr = kc[idx][0] * fc[idx][0] - kc[idx][1] * fc[idx][1];
    const double pi = kc[idx][0] * fc[idx][1] + kc[idx][1] * fc[idx][0];
    oc[idx][0] += sr * pr - si * pi;
    oc[idx][1] += sr * pi + si * pr;
  }
}

void GridConvolution::extract(int output_slot, Complex* out) {
  Impl& s = *impl_;
  std::memcpy(s.work, s.outputs[static_cast<std::size_t>(output_slot)],
              sizeof(fftw_complex) * s.padded_size);
  fftw_execute(s.backward);
  const double norm = 1.0 / static_cast<double>(s.padded_size);
  for (int k = 0; k < s.grid.dims[2]; ++k)
    for (int j = 0; j < s.grid.dims[1]; ++j)
      for (int i = 0; i < s.grid.dims[0]; ++i) {
        const std::size_t idx = s.padded_index(i, j, k);
        out[s.grid.index(i, j, k)] =
            Complex(s.work[idx][0] * norm, s.work[idx][1] * norm);
      }
}

}  // namespace smallscat
