#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace bdprop {

using Vec = std::vector<double>;

/// Dense row-major matrix. All solver arithmetic goes through the kernels
/// below with fixed loop order, so results are reproducible and the
/// operation tallies stay exact.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
  std::size_t size() const { return a.size(); }
  bool operator==(const Matrix&) const = default;
};

/// Operation tallies for one solve.
///
/// - `fma` counts scalar multiply-adds spent in coupling products.
/// - `activation` counts activation evaluations and diagonal scalings.
/// - `parallel_steps` is an analytic CREW critical-path count with one
///   processor per block: independent block rows and independent reduced
///   chains contribute their maximum, sequential phases their sum.
/// - `coupling_build_fma` is the subset of `fma` spent constructing reduced
///   coupling matrices during cyclic reduction.
/// - `peak_live_scalars` tracks the largest amount of intermediate coupling
///   storage (scalars) alive at any point; original system couplings are
///   not counted.
struct WorkCounters {
  std::uint64_t fma = 0;
  std::uint64_t activation = 0;
  std::uint64_t parallel_steps = 0;
  std::uint64_t coupling_build_fma = 0;
  std::uint64_t live_scalars = 0;
  std::uint64_t peak_live_scalars = 0;

  void add_fma(std::uint64_t n) { fma += n; }
  void add_activation(std::uint64_t n) { activation += n; }
  void add_path(std::uint64_t n) { parallel_steps += n; }
  void alloc_scalars(std::uint64_t n) {
    live_scalars += n;
    if (live_scalars > peak_live_scalars) peak_live_scalars = live_scalars;
  }
  void release_scalars(std::uint64_t n) { live_scalars -= n; }
  WorkCounters& operator+=(const WorkCounters& o);
};

// acc[i] += sum_j m(i,j) x[j]
void matvec_add(const Matrix& m, const Vec& x, Vec& acc, WorkCounters* wc);
// acc[j] += sum_i m(i,j) x[i]
void matvec_transposed_add(const Matrix& m, const Vec& x, Vec& acc, WorkCounters* wc);
Matrix matmul(const Matrix& a, const Matrix& b, WorkCounters* wc);
Matrix transpose(const Matrix& m);

double dot(const Vec& a, const Vec& b);
double inf_norm(const Vec& v);
double inf_norm_blocks(const std::vector<Vec>& blocks);
double max_abs_diff(const std::vector<Vec>& a, const std::vector<Vec>& b);

}  // namespace bdprop
