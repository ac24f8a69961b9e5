#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace enskit {

/// Dense row-major array of 64-bit floats with an explicit shape.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);

    /// 2-D convenience constructor from nested lists (rows must be equal length).
    static Tensor from_rows(const std::vector<std::vector<double>>& rows);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool all_finite() const;
    void fill(double value);

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_string() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// C = A * B for A [p x q], B [q x r].
///
/// Accumulation over the inner index is in ascending order for every output
/// element, so per-row results do not depend on how many rows the call sees.
Tensor matmul(const Tensor& a, const Tensor& b);

/// C = A^T * B for A [p x q], B [p x r] -> [q x r]. Accumulates into `out` when given.
Tensor matmul_transpose_a(const Tensor& a, const Tensor& b);
void matmul_transpose_a_into(const Tensor& a, const Tensor& b, Tensor& out);

/// C = A * B^T for A [p x q], B [r x q] -> [p x r].
Tensor matmul_transpose_b(const Tensor& a, const Tensor& b);

/// Adds a length-n row vector to every row of an [m x n] matrix.
void add_row_inplace(Tensor& matrix, const Tensor& row);

/// Stacks `times` copies of the whole matrix: [m x n] -> [times*m x n].
Tensor tile_rows(const Tensor& matrix, std::size_t times);

/// Repeats each row's content `times` times: [m x n] -> [m x times*n].
Tensor tile_cols(const Tensor& matrix, std::size_t times);

/// Rows [begin, end) of a 2-D tensor as a new tensor.
Tensor slice_rows(const Tensor& matrix, std::size_t begin, std::size_t end);

} // namespace enskit
