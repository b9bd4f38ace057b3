#include "csmri/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace csmri {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int rows, int cols, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(rows, cols, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* scratch = fftw_alloc_complex(static_cast<std::size_t>(rows) * cols);
    fftw_plan plan = fftw_plan_dft_2d(rows, cols, scratch, scratch, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

// out[(i + shift_r) % rows][(j + shift_c) % cols] = in[i][j]
void circular_shift(ComplexField& z, int shift_r, int shift_c) {
  const int rows = z.rows();
  const int cols = z.cols();
  if (shift_r == 0 && shift_c == 0) return;
  ComplexField out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const int oi = (i + shift_r) % rows;
    for (int j = 0; j < cols; ++j) out.at(oi, (j + shift_c) % cols) = z.at(i, j);
  }
  z = std::move(out);
}

void centered_transform(ComplexField& z, int sign) {
  const int rows = z.rows();
  const int cols = z.cols();
  // ifftshift moves index floor(N/2) to 0
  circular_shift(z, rows - rows / 2, cols - cols / 2);
  auto* buf = reinterpret_cast<fftw_complex*>(z.data());
  fftw_execute_dft(plan_cache().get(rows, cols, sign), buf, buf);
  circular_shift(z, rows / 2, cols / 2);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows) * cols);
  for (Complex& v : z.values()) v *= scale;
}

}  // namespace

void fft2c(ComplexField& z) { centered_transform(z, FFTW_FORWARD); }
void ifft2c(ComplexField& z) { centered_transform(z, FFTW_BACKWARD); }

ComplexField fft2c(const ComplexField& z) {
  ComplexField out = z;
  fft2c(out);
  return out;
}

ComplexField ifft2c(const ComplexField& z) {
  ComplexField out = z;
  ifft2c(out);
  return out;
}

}  // namespace csmri
