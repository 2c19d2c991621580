#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mfchaos {

// Compressed sparse row matrix with double entries.
class SparseMatrix {
 public:
  struct Entry {
    std::uint32_t col;
    double value;
  };

  SparseMatrix() = default;
  // Rows given as (column, value) lists; columns need not be sorted.
  static SparseMatrix from_rows(std::size_t cols, const std::vector<std::vector<Entry>>& rows);
  // Raw CSR arrays; each row is sorted by column and checked for duplicates.
  static SparseMatrix from_csr(std::size_t cols, std::vector<std::size_t> row_ptr,
                               std::vector<std::uint32_t> col, std::vector<double> values);

  [[nodiscard]] std::size_t rows() const noexcept { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t nonzeros() const noexcept { return values_.size(); }
  [[nodiscard]] std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  [[nodiscard]] std::span<const std::uint32_t> col_index() const noexcept { return col_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<double> values() noexcept { return values_; }

  // y = A x, one row per output, serial.
  void multiply(std::span<const double> x, std::span<double> y) const;
  // y = A x with rows split across OpenMP threads; each row is summed in the
  // same order as multiply(), so the result is bitwise identical.
  void multiply_parallel(std::span<const double> x, std::span<double> y) const;

  [[nodiscard]] SparseMatrix transpose() const;
  [[nodiscard]] double entry(std::size_t row, std::size_t col) const;
  [[nodiscard]] std::vector<double> column_sums() const;
  [[nodiscard]] std::vector<double> diagonal() const;

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> col_;
  std::vector<double> values_;
};

}  // namespace mfchaos
