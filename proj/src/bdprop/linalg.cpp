#include "bdprop/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace bdprop {

WorkCounters& WorkCounters::operator+=(const WorkCounters& o) {
  fma += o.fma;
  activation += o.activation;
  parallel_steps += o.parallel_steps;
  coupling_build_fma += o.coupling_build_fma;
  // live storage is per-solve; only the peak carries over meaningfully
  if (o.peak_live_scalars > peak_live_scalars) peak_live_scalars = o.peak_live_scalars;
  return *this;
}

void matvec_add(const Matrix& m, const Vec& x, Vec& acc, WorkCounters* wc) {
  if (x.size() != m.cols || acc.size() != m.rows)
    throw std::invalid_argument("matvec_add: dimension mismatch");
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = acc[i];
    const double* row = m.a.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * x[j];
    acc[i] = s;
  }
  if (wc) wc->add_fma(static_cast<std::uint64_t>(m.rows) * m.cols);
}

void matvec_transposed_add(const Matrix& m, const Vec& x, Vec& acc, WorkCounters* wc) {
  if (x.size() != m.rows || acc.size() != m.cols)
    throw std::invalid_argument("matvec_transposed_add: dimension mismatch");
  for (std::size_t j = 0; j < m.cols; ++j) {
    double s = acc[j];
    for (std::size_t i = 0; i < m.rows; ++i) s += m(i, j) * x[i];
    acc[j] = s;
  }
  if (wc) wc->add_fma(static_cast<std::uint64_t>(m.rows) * m.cols);
}

Matrix matmul(const Matrix& a, const Matrix& b, WorkCounters* wc) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: dimension mismatch");
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < b.cols; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols; ++j) s += a(i, j) * b(j, k);
      out(i, k) = s;
    }
  if (wc) wc->add_fma(static_cast<std::uint64_t>(a.rows) * a.cols * b.cols);
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(const Vec& v) {
  double m = 0.0;
  for (double x : v) {
    double ax = std::fabs(x);
    if (ax > m) m = ax;
  }
  return m;
}

double inf_norm_blocks(const std::vector<Vec>& blocks) {
  double m = 0.0;
  for (const Vec& b : blocks) {
    double n = inf_norm(b);
    if (n > m) m = n;
  }
  return m;
}

double max_abs_diff(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: block count mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].size() != b[k].size())
      throw std::invalid_argument("max_abs_diff: block size mismatch");
    for (std::size_t i = 0; i < a[k].size(); ++i) {
      double d = std::fabs(a[k][i] - b[k][i]);
      if (d > m) m = d;
    }
  }
  return m;
}

}  // namespace bdprop
