#ifndef EMBEDFUSE_VECTOR_OPS_HPP
#define EMBEDFUSE_VECTOR_OPS_HPP

#include <cstddef>
#include <span>
#include <vector>

/**
 * @file vector_ops.hpp
 *
 * @brief Dimension-checked dense vector math shared by the rest of the library.
 *
 * Everything here works in double precision; single-precision data from disk is
 * widened on the way in.
 */

namespace embedfuse {

using Vector = std::vector<double>;

/**
 * @brief Row-major dense matrix.
 *
 * Used both as a batch of embeddings (one row per embedding, `cols()` is the
 * embedding dimension) and as a weight matrix of a linear layer.
 */
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    /// Alias of cols() when the matrix holds embeddings.
    std::size_t dim() const { return cols_; }
    bool empty() const { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    void append_row(std::span<const double> values);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Throws DimensionError unless the two dimensions agree.
void require_same_dim(std::size_t a, std::size_t b, const char* what);

/// Throws DataError if any element is NaN or infinite.
void require_finite(std::span<const double> v, const char* what);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Cosine of the angle between `a` and `b`, clamped to [-1, 1].
/// Zero-norm inputs are rejected with DataError.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

Vector l2_normalize(std::span<const double> v);

/// Entry (i, j) is cosine_similarity(queries.row(i), corpus.row(j)).
Matrix pairwise_cosine(const Matrix& queries, const Matrix& corpus);

/// out = weight * x + bias (bias may be empty).
void affine(const Matrix& weight, std::span<const double> bias, std::span<const double> x, std::span<double> out);

Vector to_vector(std::span<const float> v);

} // namespace embedfuse

#endif
