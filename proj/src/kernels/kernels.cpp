#include "lam/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace lam::kernels {

namespace scalar {

void exp_v(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void gaussian_field_row(double* fx, double* fy, int width, int y, double mux, double muy,
                        double inv_two_sigma_sq) {
  const double dy = muy - static_cast<double>(y);
  const double dy2 = dy * dy;
  for (int i = 0; i < width; ++i) {
    const double dx = mux - static_cast<double>(i);
    const double d2 = dx * dx + dy2;
    if (d2 == 0.0) {
      fx[i] = 0.0;
      fy[i] = 0.0;
      continue;
    }
    const double m = std::exp(-d2 * inv_two_sigma_sq) / std::sqrt(d2);
    fx[i] = m * dx;
    fy[i] = m * dy;
  }
}

double min_sqdist(double px, double py, const double* xs, const double* ys, std::size_t n) {
  double best = (px - xs[0]) * (px - xs[0]) + (py - ys[0]) * (py - ys[0]);
  for (std::size_t i = 1; i < n; ++i) {
    const double dx = px - xs[i];
    const double dy = py - ys[i];
    const double d2 = dx * dx + dy * dy;
    if (d2 < best) best = d2;
  }
  return best;
}

std::int64_t ising_bond_sum(const std::int8_t* labels, int w, int h) {
  std::int64_t sum = 0;
  for (int y = 0; y < h; ++y) {
    const std::int8_t* row = labels + static_cast<std::ptrdiff_t>(y) * w;
    for (int x = 0; x + 1 < w; ++x) sum += row[x] * row[x + 1];
    if (y + 1 < h) {
      const std::int8_t* below = row + w;
      for (int x = 0; x < w; ++x) sum += row[x] * below[x];
    }
  }
  return sum;
}

double sqdist(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace scalar

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

Backend initial_backend() {
  if (const char* f = std::getenv("LAM_FORCE_SCALAR"); f && f[0] == '1') return Backend::kScalar;
  return avx2_supported() ? Backend::kAvx2 : Backend::kScalar;
}

Backend& backend_slot() {
  static Backend b = initial_backend();
  return b;
}

}  // namespace

Backend active() { return backend_slot(); }

void select(Backend b) {
  if (b == Backend::kAvx2 && !avx2_supported())
    throw std::runtime_error("AVX2 backend requested but the CPU has no AVX2");
  backend_slot() = b;
}

#if defined(__x86_64__) || defined(_M_X64)
#define LAM_DISPATCH(fn, ...) \
  (active() == Backend::kAvx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define LAM_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void exp_v(const double* x, double* out, std::size_t n) { LAM_DISPATCH(exp_v, x, out, n); }

void gaussian_field_row(double* fx, double* fy, int width, int y, double mux, double muy,
                        double inv_two_sigma_sq) {
  LAM_DISPATCH(gaussian_field_row, fx, fy, width, y, mux, muy, inv_two_sigma_sq);
}

double min_sqdist(double px, double py, const double* xs, const double* ys, std::size_t n) {
  return LAM_DISPATCH(min_sqdist, px, py, xs, ys, n);
}

std::int64_t ising_bond_sum(const std::int8_t* labels, int w, int h) {
  return LAM_DISPATCH(ising_bond_sum, labels, w, h);
}

double sqdist(const double* a, const double* b, std::size_t n) {
  return LAM_DISPATCH(sqdist, a, b, n);
}

#undef LAM_DISPATCH

}  // namespace lam::kernels
