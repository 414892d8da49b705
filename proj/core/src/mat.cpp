#include "orthomerge/mat.hpp"

#include <cmath>
#include <cstdio>

namespace ortho {

DegenerateColumn::DegenerateColumn(std::vector<std::size_t> cols)
    : std::runtime_error("degenerate (near-zero) columns: " +
                         [&cols] {
                             std::string s;
                             for (auto c : cols) s += std::to_string(c) + " ";
                             return s;
                         }()),
      columns(std::move(cols)) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw ShapeMismatch("Mat: data length " + std::to_string(data_.size()) +
                            " != " + std::to_string(rows_ * cols_));
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::diag(std::span<const double> d) {
    Mat m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Mat Mat::transpose() const {
    Mat t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Mat Mat::operator*(const Mat& rhs) const {
    if (cols_ != rhs.rows_) throw ShapeMismatch("matmul: inner dims differ");
    Mat out(rows_, rhs.cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t k = 0; k < cols_; ++k) {
            const double a = (*this)(i, k);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < rhs.cols_; ++j)
                out(i, j) += a * rhs(k, j);
        }
    }
    return out;
}

Mat Mat::operator+(const Mat& rhs) const {
    Mat out = *this;
    out += rhs;
    return out;
}

Mat Mat::operator-(const Mat& rhs) const {
    Mat out = *this;
    out -= rhs;
    return out;
}

Mat& Mat::operator+=(const Mat& rhs) {
    if (!same_shape(rhs)) throw ShapeMismatch("add: shapes differ");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
}

Mat& Mat::operator-=(const Mat& rhs) {
    if (!same_shape(rhs)) throw ShapeMismatch("sub: shapes differ");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
}

Mat& Mat::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Mat Mat::scaled(double s) const {
    Mat out = *this;
    out *= s;
    return out;
}

double Mat::frobenius_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return std::sqrt(acc);
}

double Mat::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

bool Mat::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::vector<double> Mat::apply_transposed(std::span<const double> x) const {
    if (x.size() != rows_) throw ShapeMismatch("apply_transposed: length != rows");
    std::vector<double> y(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < cols_; ++j) y[j] += xi * (*this)(i, j);
    }
    return y;
}

std::vector<double> Mat::apply(std::span<const double> x) const {
    if (x.size() != cols_) throw ShapeMismatch("apply: length != cols");
    std::vector<double> y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) acc += (*this)(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

double pairwise_sum(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double acc = 0.0;
        for (double v : xs) acc += v;
        return acc;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

double frobenius_inner(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("frobenius_inner: shapes differ");
    return dot(a.data(), b.data());
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeMismatch("dot: lengths differ");
    std::vector<double> prods(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) prods[i] = a[i] * b[i];
    return pairwise_sum(prods);
}

}  // namespace ortho
