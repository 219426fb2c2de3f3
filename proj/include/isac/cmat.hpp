#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace isac {

using cxd = std::complex<double>;

/// Dense complex matrix in row-major order. Carrier type for pilot blocks,
/// received sub-frame rows, and channel coefficient matrices.
class CMat {
 public:
  CMat() = default;
  CMat(std::size_t rows, std::size_t cols, cxd fill = cxd{})
      : rows_(rows), cols_(cols), entries_(rows * cols, fill) {}

  static CMat identity(std::size_t n) {
    CMat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static CMat diagonal(std::span<const cxd> values) {
    CMat m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  cxd& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
  const cxd& operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

  std::span<cxd> entries() { return entries_; }
  std::span<const cxd> entries() const { return entries_; }

  /// Copy of row r as a 1 x cols matrix.
  CMat row(std::size_t r) const {
    CMat out(1, cols_);
    for (std::size_t c = 0; c < cols_; ++c) out(0, c) = (*this)(r, c);
    return out;
  }

  void set_row(std::size_t r, const CMat& values) {
    if (values.rows() != 1 || values.cols() != cols_)
      throw std::invalid_argument("set_row: shape mismatch");
    for (std::size_t c = 0; c < cols_; ++c) (*this)(r, c) = values(0, c);
  }

  CMat& operator+=(const CMat& other) {
    require_same_shape(other, "operator+=");
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] += other.entries_[i];
    return *this;
  }

  CMat& operator-=(const CMat& other) {
    require_same_shape(other, "operator-=");
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] -= other.entries_[i];
    return *this;
  }

  CMat& operator*=(cxd s) {
    for (auto& e : entries_) e *= s;
    return *this;
  }

 private:
  void require_same_shape(const CMat& other, const char* what) const {
    if (rows_ != other.rows_ || cols_ != other.cols_) throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cxd> entries_;
};

inline CMat operator+(CMat a, const CMat& b) { return a += b; }
inline CMat operator-(CMat a, const CMat& b) { return a -= b; }
inline CMat operator*(cxd s, CMat a) { return a *= s; }
inline CMat operator*(CMat a, cxd s) { return a *= s; }

inline CMat matmul(const CMat& a, const CMat& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions disagree");
  CMat out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cxd aik = a(i, k);
      if (aik == cxd{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

inline CMat operator*(const CMat& a, const CMat& b) { return matmul(a, b); }

inline CMat hermitian(const CMat& a) {
  CMat out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = std::conj(a(i, j));
  return out;
}

inline double frobenius(const CMat& a) {
  double sum = 0.0;
  for (const auto& e : a.entries()) sum += std::norm(e);
  return std::sqrt(sum);
}

inline double max_abs_diff(const CMat& a, const CMat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.entries()[i] - b.entries()[i]));
  return worst;
}

inline bool all_finite(const CMat& a) {
  for (const auto& e : a.entries())
    if (!std::isfinite(e.real()) || !std::isfinite(e.imag())) return false;
  return true;
}

/// Gauss-Jordan inverse with partial pivoting. Pivot magnitudes below 1e-12
/// are treated as singular.
inline CMat inverse(const CMat& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("inverse: matrix must be square");
  constexpr double kPivotTol = 1e-12;
  const std::size_t n = a.rows();
  CMat work = a;
  CMat inv = CMat::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot_row = col;
    double pivot_mag = std::abs(work(col, col));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double mag = std::abs(work(r, col));
      if (mag > pivot_mag) {
        pivot_mag = mag;
        pivot_row = r;
      }
    }
    if (pivot_mag <= kPivotTol) throw std::runtime_error("inverse: singular matrix (pivot below tolerance)");
    if (pivot_row != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(work(col, c), work(pivot_row, c));
        std::swap(inv(col, c), inv(pivot_row, c));
      }
    }
    const cxd scale = 1.0 / work(col, col);
    for (std::size_t c = 0; c < n; ++c) {
      work(col, c) *= scale;
      inv(col, c) *= scale;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const cxd factor = work(r, col);
      if (factor == cxd{}) continue;
      for (std::size_t c = 0; c < n; ++c) {
        work(r, c) -= factor * work(col, c);
        inv(r, c) -= factor * inv(col, c);
      }
    }
  }
  if (!all_finite(inv)) throw std::runtime_error("inverse: non-finite result");
  return inv;
}

/// Moore-Penrose pseudoinverse for a full-rank rectangular matrix: the right
/// form Aᴴ(AAᴴ)⁻¹ for wide/square inputs, the left form (AᴴA)⁻¹Aᴴ for tall.
inline CMat pinv(const CMat& a) {
  try {
    if (a.rows() <= a.cols()) {
      return matmul(hermitian(a), inverse(matmul(a, hermitian(a))));
    }
    return matmul(inverse(matmul(hermitian(a), a)), hermitian(a));
  } catch (const std::runtime_error&) {
    throw std::runtime_error("pinv: rank-deficient input (inner inverse failed)");
  }
}

/// entry(q, w) = scale * exp(j 2 pi q w / n_cols), indices from 0.
inline CMat dft_matrix(std::size_t n_rows, std::size_t n_cols, double scale) {
  if (n_rows < 1 || n_cols < 1) throw std::invalid_argument("dft_matrix: empty shape");
  CMat out(n_rows, n_cols);
  for (std::size_t q = 0; q < n_rows; ++q) {
    for (std::size_t w = 0; w < n_cols; ++w) {
      // reduce q*w mod n_cols in exact integer arithmetic to keep phases small
      const std::size_t k = (q * w) % n_cols;
      out(q, w) = std::polar(scale, 2.0 * std::numbers::pi * double(k) / double(n_cols));
    }
  }
  return out;
}

/// Rows [first, last) as a new matrix.
inline CMat take_rows(const CMat& a, std::size_t first, std::size_t last) {
  if (first > last || last > a.rows()) throw std::invalid_argument("take_rows: bad range");
  CMat out(last - first, a.cols());
  for (std::size_t r = first; r < last; ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r - first, c) = a(r, c);
  return out;
}

/// Column-major vectorization.
inline std::vector<cxd> vec_column_major(const CMat& a) {
  std::vector<cxd> out;
  out.reserve(a.size());
  for (std::size_t c = 0; c < a.cols(); ++c)
    for (std::size_t r = 0; r < a.rows(); ++r) out.push_back(a(r, c));
  return out;
}

/// Inverse of vec_column_major.
inline CMat from_column_major(std::span<const cxd> values, std::size_t rows, std::size_t cols) {
  if (values.size() != rows * cols) throw std::invalid_argument("from_column_major: length mismatch");
  CMat out(rows, cols);
  std::size_t i = 0;
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r) out(r, c) = values[i++];
  return out;
}

}  // namespace isac
