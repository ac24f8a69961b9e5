#include "enskit/tensor.hpp"

#include <cmath>
#include <sstream>

#include "enskit/common.hpp"

namespace enskit {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return n;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    ENSKIT_THROW_IF(shape_product(shape_) != data_.size(), DimensionError,
                    "tensor data has " << data_.size() << " values but shape "
                                       << shape_string() << " needs " << shape_product(shape_));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
    ENSKIT_THROW_IF(rows.empty(), DimensionError, "from_rows needs at least one row");
    const std::size_t cols = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * cols);
    for (const auto& row : rows) {
        ENSKIT_THROW_IF(row.size() != cols, DimensionError,
                        "ragged rows: expected " << cols << " values, got " << row.size());
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return Tensor({rows.size(), cols}, std::move(flat));
}

std::size_t Tensor::extent(std::size_t axis) const {
    ENSKIT_THROW_IF(axis >= shape_.size(), IndexError,
                    "axis " << axis << " out of range for rank " << shape_.size());
    return shape_[axis];
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double value) {
    for (double& v : data_) v = value;
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << " x ";
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

namespace {

void require_matrix(const Tensor& t, const char* name) {
    ENSKIT_THROW_IF(t.rank() != 2, DimensionError,
                    name << " must be 2-D, got shape " << t.shape_string());
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul lhs");
    require_matrix(b, "matmul rhs");
    const std::size_t p = a.extent(0), q = a.extent(1), r = b.extent(1);
    ENSKIT_THROW_IF(b.extent(0) != q, DimensionError,
                    "matmul inner dimensions differ: " << a.shape_string() << " * "
                                                       << b.shape_string());
    Tensor c({p, r});
    for (std::size_t i = 0; i < p; ++i) {
        const double* arow = a.data() + i * q;
        double* crow = c.data() + i * r;
        for (std::size_t k = 0; k < q; ++k) {
            const double av = arow[k];
            const double* brow = b.data() + k * r;
            for (std::size_t j = 0; j < r; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
    return c;
}

void matmul_transpose_a_into(const Tensor& a, const Tensor& b, Tensor& out) {
    require_matrix(a, "matmul_transpose_a lhs");
    require_matrix(b, "matmul_transpose_a rhs");
    const std::size_t p = a.extent(0), q = a.extent(1), r = b.extent(1);
    ENSKIT_THROW_IF(b.extent(0) != p, DimensionError,
                    "matmul_transpose_a row counts differ: " << a.shape_string() << " vs "
                                                             << b.shape_string());
    ENSKIT_THROW_IF(out.rank() != 2 || out.extent(0) != q || out.extent(1) != r, DimensionError,
                    "matmul_transpose_a output must be [" << q << " x " << r << "], got "
                                                          << out.shape_string());
    for (std::size_t k = 0; k < p; ++k) {
        const double* arow = a.data() + k * q;
        const double* brow = b.data() + k * r;
        for (std::size_t i = 0; i < q; ++i) {
            const double av = arow[i];
            double* orow = out.data() + i * r;
            for (std::size_t j = 0; j < r; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
}

Tensor matmul_transpose_a(const Tensor& a, const Tensor& b) {
    Tensor out({a.extent(1), b.extent(1)});
    matmul_transpose_a_into(a, b, out);
    return out;
}

Tensor matmul_transpose_b(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_transpose_b lhs");
    require_matrix(b, "matmul_transpose_b rhs");
    const std::size_t p = a.extent(0), q = a.extent(1), r = b.extent(0);
    ENSKIT_THROW_IF(b.extent(1) != q, DimensionError,
                    "matmul_transpose_b column counts differ: " << a.shape_string() << " vs "
                                                                << b.shape_string());
    Tensor c({p, r});
    for (std::size_t i = 0; i < p; ++i) {
        const double* arow = a.data() + i * q;
        double* crow = c.data() + i * r;
        for (std::size_t j = 0; j < r; ++j) {
            const double* brow = b.data() + j * q;
            double acc = 0.0;
            for (std::size_t k = 0; k < q; ++k) {
                acc += arow[k] * brow[k];
            }
            crow[j] = acc;
        }
    }
    return c;
}

void add_row_inplace(Tensor& matrix, const Tensor& row) {
    require_matrix(matrix, "add_row_inplace target");
    const std::size_t m = matrix.extent(0), n = matrix.extent(1);
    ENSKIT_THROW_IF(row.size() != n, DimensionError,
                    "row has " << row.size() << " values, matrix has " << n << " columns");
    for (std::size_t i = 0; i < m; ++i) {
        double* mrow = matrix.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            mrow[j] += row[j];
        }
    }
}

Tensor tile_rows(const Tensor& matrix, std::size_t times) {
    require_matrix(matrix, "tile_rows input");
    ENSKIT_THROW_IF(times == 0, ValidationError, "tile_rows needs times >= 1");
    const std::size_t m = matrix.extent(0), n = matrix.extent(1);
    Tensor out({times * m, n});
    for (std::size_t rep = 0; rep < times; ++rep) {
        std::copy(matrix.data(), matrix.data() + m * n, out.data() + rep * m * n);
    }
    return out;
}

Tensor tile_cols(const Tensor& matrix, std::size_t times) {
    require_matrix(matrix, "tile_cols input");
    ENSKIT_THROW_IF(times == 0, ValidationError, "tile_cols needs times >= 1");
    const std::size_t m = matrix.extent(0), n = matrix.extent(1);
    Tensor out({m, times * n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* src = matrix.data() + i * n;
        for (std::size_t rep = 0; rep < times; ++rep) {
            std::copy(src, src + n, out.data() + (i * times + rep) * n);
        }
    }
    return out;
}

Tensor slice_rows(const Tensor& matrix, std::size_t begin, std::size_t end) {
    require_matrix(matrix, "slice_rows input");
    const std::size_t m = matrix.extent(0), n = matrix.extent(1);
    ENSKIT_THROW_IF(begin > end || end > m, IndexError,
                    "slice_rows [" << begin << ", " << end << ") out of range for " << m
                                   << " rows");
    Tensor out({end - begin, n});
    std::copy(matrix.data() + begin * n, matrix.data() + end * n, out.data());
    return out;
}

} // namespace enskit
