#include "embedfuse/vector_ops.hpp"

#include "embedfuse/error.hpp"
#include "embedfuse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace embedfuse {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("matrix data has " + std::to_string(data_.size()) + " values, expected " +
                             std::to_string(rows_ * cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        out(i, i) = 1.0;
    }
    return out;
}

void Matrix::append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) {
        cols_ = values.size();
    }
    require_same_dim(values.size(), cols_, "appended row");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                             std::to_string(b) + ")");
    }
}

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw DataError(std::string(what) + ": non-finite value");
        }
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a.size(), b.size(), "dot");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

double l2_norm(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) {
        sum += x * x;
    }
    return std::sqrt(sum);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a.size(), b.size(), "cosine_similarity");
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw DataError("cosine_similarity: zero-norm embedding");
    }
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Vector l2_normalize(std::span<const double> v) {
    const double n = l2_norm(v);
    if (n == 0.0) {
        throw DataError("l2_normalize: zero-norm embedding");
    }
    Vector out(v.begin(), v.end());
    for (double& x : out) {
        x /= n;
    }
    return out;
}

Matrix pairwise_cosine(const Matrix& queries, const Matrix& corpus) {
    Matrix out(queries.rows(), corpus.rows());
    if (queries.empty()) {
        return out;
    }
    require_same_dim(queries.dim(), corpus.dim(), "pairwise_cosine");

    Vector corpus_norms(corpus.rows());
    for (std::size_t j = 0; j < corpus.rows(); ++j) {
        corpus_norms[j] = l2_norm(corpus.row(j));
        if (corpus_norms[j] == 0.0) {
            throw DataError("pairwise_cosine: zero-norm corpus row " + std::to_string(j));
        }
    }

    parallel_for(queries.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto q = queries.row(i);
            const double qn = l2_norm(q);
            if (qn == 0.0) {
                throw DataError("pairwise_cosine: zero-norm query row " + std::to_string(i));
            }
            for (std::size_t j = 0; j < corpus.rows(); ++j) {
                out(i, j) = std::clamp(dot(q, corpus.row(j)) / (qn * corpus_norms[j]), -1.0, 1.0);
            }
        }
    });
    return out;
}

void affine(const Matrix& weight, std::span<const double> bias, std::span<const double> x, std::span<double> out) {
    require_same_dim(weight.cols(), x.size(), "affine input");
    require_same_dim(weight.rows(), out.size(), "affine output");
    if (!bias.empty()) {
        require_same_dim(weight.rows(), bias.size(), "affine bias");
    }
    for (std::size_t r = 0; r < weight.rows(); ++r) {
        double sum = bias.empty() ? 0.0 : bias[r];
        const auto w = weight.row(r);
        for (std::size_t c = 0; c < x.size(); ++c) {
            sum += w[c] * x[c];
        }
        out[r] = sum;
    }
}

Vector to_vector(std::span<const float> v) {
    return Vector(v.begin(), v.end());
}

} // namespace embedfuse
