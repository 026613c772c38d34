#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops used by the field, metric, model and clustering
// code. Each kernel has a scalar reference implementation and an AVX2 variant;
// the active backend is chosen at runtime from CPU capabilities and can be
// pinned for testing. min_sqdist and ising_bond_sum are bit-exact across
// backends; exp_v / gaussian_field_row / sqdist agree to ~1 ulp because the
// vector exp is a polynomial, not libm.

namespace lam::kernels {

enum class Backend { kScalar, kAvx2 };

/// Currently active backend (auto-detected on first use).
Backend active();

/// Pin a backend. Selecting kAvx2 on a CPU without AVX2 throws.
/// Setting LAM_FORCE_SCALAR=1 in the environment pins scalar at startup.
void select(Backend b);

bool avx2_supported();

/// out[i] = exp(x[i])
void exp_v(const double* x, double* out, std::size_t n);

/// Attraction-field row fill: for i in [0, width), with d = (mux - i, muy - y),
///   m    = exp(-|d|^2 * inv_two_sigma_sq) / |d|
///   fx[i] = m * d.x, fy[i] = m * d.y
/// and exactly (0, 0) at the cell where d = 0.
void gaussian_field_row(double* fx, double* fy, int width, int y, double mux, double muy,
                        double inv_two_sigma_sq);

/// min over i of (px - xs[i])^2 + (py - ys[i])^2. n must be > 0.
double min_sqdist(double px, double py, const double* xs, const double* ys, std::size_t n);

/// Sum of l[i]*l[j] over unordered 4-neighbor pairs of a w x h row-major
/// grid of +-1 labels.
std::int64_t ising_bond_sum(const std::int8_t* labels, int w, int h);

/// Sum of (a[i] - b[i])^2.
double sqdist(const double* a, const double* b, std::size_t n);

namespace scalar {
void exp_v(const double* x, double* out, std::size_t n);
void gaussian_field_row(double* fx, double* fy, int width, int y, double mux, double muy,
                        double inv_two_sigma_sq);
double min_sqdist(double px, double py, const double* xs, const double* ys, std::size_t n);
std::int64_t ising_bond_sum(const std::int8_t* labels, int w, int h);
double sqdist(const double* a, const double* b, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void exp_v(const double* x, double* out, std::size_t n);
void gaussian_field_row(double* fx, double* fy, int width, int y, double mux, double muy,
                        double inv_two_sigma_sq);
double min_sqdist(double px, double py, const double* xs, const double* ys, std::size_t n);
std::int64_t ising_bond_sum(const std::int8_t* labels, int w, int h);
double sqdist(const double* a, const double* b, std::size_t n);
}  // namespace avx2
#endif

}  // namespace lam::kernels
