#include "mfchaos/sparse.hpp"

#include <algorithm>

#include "mfchaos/errors.hpp"
#include "mfchaos/numeric.hpp"

namespace mfchaos {

SparseMatrix SparseMatrix::from_rows(std::size_t cols,
                                     const std::vector<std::vector<Entry>>& rows) {
  SparseMatrix m;
  m.cols_ = cols;
  m.row_ptr_.assign(rows.size() + 1, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) m.row_ptr_[r + 1] = m.row_ptr_[r] + rows[r].size();
  m.col_.resize(m.row_ptr_.back());
  m.values_.resize(m.row_ptr_.back());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<Entry> sorted = rows[r];
    std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i].col >= cols) throw IndexRange("sparse column out of range");
      if (i > 0 && sorted[i].col == sorted[i - 1].col) throw IndexRange("duplicate sparse entry");
      m.col_[m.row_ptr_[r] + i] = sorted[i].col;
      m.values_[m.row_ptr_[r] + i] = sorted[i].value;
    }
  }
  return m;
}

SparseMatrix SparseMatrix::from_csr(std::size_t cols, std::vector<std::size_t> row_ptr,
                                    std::vector<std::uint32_t> col, std::vector<double> values) {
  if (row_ptr.empty() || row_ptr.front() != 0 || row_ptr.back() != col.size() ||
      col.size() != values.size()) {
    throw DimensionMismatch("inconsistent CSR arrays");
  }
  SparseMatrix m;
  m.cols_ = cols;
  m.row_ptr_ = std::move(row_ptr);
  m.col_ = std::move(col);
  m.values_ = std::move(values);
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(m.rows());
  bool bad = false;
#pragma omp parallel for schedule(static) reduction(|| : bad)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t b = m.row_ptr_[r], e = m.row_ptr_[r + 1];
    if (e < b) {
      bad = true;
      continue;
    }
    std::vector<Entry> row(e - b);
    for (std::size_t p = b; p < e; ++p) row[p - b] = {m.col_[p], m.values_[p]};
    std::sort(row.begin(), row.end(), [](const Entry& x, const Entry& y) { return x.col < y.col; });
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i].col >= cols || (i > 0 && row[i].col == row[i - 1].col)) bad = true;
      m.col_[b + i] = row[i].col;
      m.values_[b + i] = row[i].value;
    }
  }
  if (bad) throw IndexRange("CSR column out of range or duplicated");
  return m;
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != cols_ || y.size() != rows()) throw DimensionMismatch("sparse multiply shape");
  const std::size_t n = rows();
  for (std::size_t r = 0; r < n; ++r) {
    double acc = 0.0;
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) acc += values_[p] * x[col_[p]];
    y[r] = acc;
  }
}

void SparseMatrix::multiply_parallel(std::span<const double> x, std::span<double> y) const {
  if (x.size() != cols_ || y.size() != rows()) throw DimensionMismatch("sparse multiply shape");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    double acc = 0.0;
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) acc += values_[p] * x[col_[p]];
    y[r] = acc;
  }
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t;
  t.cols_ = rows();
  t.row_ptr_.assign(cols_ + 1, 0);
  for (std::uint32_t c : col_) ++t.row_ptr_[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) t.row_ptr_[c + 1] += t.row_ptr_[c];
  t.col_.resize(col_.size());
  t.values_.resize(values_.size());
  std::vector<std::size_t> next(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  // Rows are visited in increasing order, so each transposed row comes out sorted.
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      const std::size_t q = next[col_[p]]++;
      t.col_[q] = static_cast<std::uint32_t>(r);
      t.values_[q] = values_[p];
    }
  }
  return t;
}

double SparseMatrix::entry(std::size_t row, std::size_t col) const {
  if (row >= rows() || col >= cols_) throw IndexRange("sparse entry");
  const auto begin = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
  const auto end = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
  const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(col));
  return (it != end && *it == col) ? values_[it - col_.begin()] : 0.0;
}

std::vector<double> SparseMatrix::column_sums() const {
  std::vector<CompensatedSum> acc(cols_);
  for (std::size_t p = 0; p < values_.size(); ++p) acc[col_[p]].add(values_[p]);
  std::vector<double> out(cols_);
  for (std::size_t c = 0; c < cols_; ++c) out[c] = acc[c].value();
  return out;
}

std::vector<double> SparseMatrix::diagonal() const {
  std::vector<double> d(std::min(rows(), cols_), 0.0);
  for (std::size_t r = 0; r < d.size(); ++r) d[r] = entry(r, r);
  return d;
}

}  // namespace mfchaos
