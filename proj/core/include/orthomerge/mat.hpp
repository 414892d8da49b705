#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ortho {

struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalFailure : std::runtime_error {
    double residual = 0.0;
    explicit NumericalFailure(const std::string& msg, double res = 0.0)
        : std::runtime_error(msg), residual(res) {}
};
struct DegenerateColumn : std::runtime_error {
    std::vector<std::size_t> columns;
    explicit DegenerateColumn(std::vector<std::size_t> cols);
};
struct EmptyDataset : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ZeroVector : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ZeroDenominator : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InfeasibleSpec : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergenceDetected : std::runtime_error {
    int epoch = -1;
    explicit DivergenceDetected(const std::string& msg, int ep)
        : std::runtime_error(msg), epoch(ep) {}
};
struct TrainingFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Mat identity(std::size_t n);
    static Mat diag(std::span<const double> d);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    Mat transpose() const;
    Mat operator*(const Mat& rhs) const;
    Mat operator+(const Mat& rhs) const;
    Mat operator-(const Mat& rhs) const;
    Mat& operator+=(const Mat& rhs);
    Mat& operator-=(const Mat& rhs);
    Mat& operator*=(double s);
    Mat scaled(double s) const;

    bool same_shape(const Mat& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    double frobenius_norm() const;
    double max_abs() const;
    bool all_finite() const;

    /// y = A^T x  (x has length rows, result length cols)
    std::vector<double> apply_transposed(std::span<const double> x) const;
    /// y = A x    (x has length cols, result length rows)
    std::vector<double> apply(std::span<const double> x) const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// Sum with pairwise (cascade) accumulation; deterministic for a fixed
/// element order and stable to ~1e-15 relative across reorderings.
double pairwise_sum(std::span<const double> xs);

/// Frobenius inner product sum_ij a_ij b_ij.
double frobenius_inner(const Mat& a, const Mat& b);

/// Dot product of equal-length vectors with pairwise accumulation.
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace ortho
