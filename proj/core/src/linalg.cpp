#include "orthomerge/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "orthomerge/rng.hpp"

namespace ortho {
namespace {

// One-sided Jacobi on a tall-or-square matrix (m >= n). Rotates column
// pairs of A until all columns are mutually orthogonal; V accumulates the
// rotations so that A_final = A_in * V.
struct JacobiOut {
    Mat a;  // rotated columns, mutually orthogonal
    Mat v;  // n x n orthogonal
};

JacobiOut one_sided_jacobi(Mat a) {
    const std::size_t n = a.cols();
    Mat v = Mat::identity(n);
    const double fro2 = a.frobenius_norm() * a.frobenius_norm();
    const double off_tol = 1e-12 * std::max(fro2, 1e-300);
    const int max_sweeps = 60;

    double worst = 0.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        worst = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < a.rows(); ++i) {
                    const double ap = a(i, p), aq = a(i, q);
                    alpha += ap * ap;
                    beta += aq * aq;
                    gamma += ap * aq;
                }
                worst = std::max(worst, std::fabs(gamma));
                if (std::fabs(gamma) <= off_tol) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t =
                    (zeta >= 0.0 ? 1.0 : -1.0) /
                    (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < a.rows(); ++i) {
                    const double ap = a(i, p), aq = a(i, q);
                    a(i, p) = c * ap - s * aq;
                    a(i, q) = s * ap + c * aq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) return {std::move(a), std::move(v)};
    }
    throw NumericalFailure("svd: Jacobi sweeps did not converge", worst);
}

// Fill a near-zero column of U with a unit vector orthogonal to all the
// others (rank-deficient inputs).
void fill_orthonormal_column(Mat& u, std::size_t col, Rng& rng) {
    const std::size_t m = u.rows();
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<double> cand(m);
        for (auto& c : cand) c = rng.gaussian();
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < u.cols(); ++j) {
                if (j == col) continue;
                double proj = 0.0, nj = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    proj += cand[i] * u(i, j);
                    nj += u(i, j) * u(i, j);
                }
                if (nj < 0.5) continue;  // skip other unfilled columns
                for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * u(i, j);
            }
        }
        double norm = std::sqrt(
            std::inner_product(cand.begin(), cand.end(), cand.begin(), 0.0));
        if (norm > 1e-8) {
            for (std::size_t i = 0; i < m; ++i) u(i, col) = cand[i] / norm;
            return;
        }
    }
    throw NumericalFailure("svd: could not complete orthonormal basis");
}

SvdResult svd_tall(const Mat& a) {
    const std::size_t m = a.rows(), n = a.cols();
    auto [rotated, v] = one_sided_jacobi(a);

    std::vector<double> s(n);
    Mat u(m, n);
    for (std::size_t j = 0; j < n; ++j) {
        double norm2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) norm2 += rotated(i, j) * rotated(i, j);
        s[j] = std::sqrt(norm2);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&s](std::size_t i, std::size_t j) { return s[i] > s[j]; });

    std::vector<double> s_sorted(n);
    Mat v_sorted(n, n);
    const double zero_tol = 1e-14 * std::max(1.0, s.empty() ? 0.0 : s[order[0]]);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        s_sorted[j] = s[src];
        for (std::size_t i = 0; i < n; ++i) v_sorted(i, j) = v(i, src);
        if (s[src] > zero_tol) {
            for (std::size_t i = 0; i < m; ++i) u(i, j) = rotated(i, src) / s[src];
        }
    }
    Rng fill_rng(0x5bd1e995u);
    for (std::size_t j = 0; j < n; ++j) {
        if (s_sorted[j] <= zero_tol) {
            s_sorted[j] = std::max(s_sorted[j], 0.0);
            fill_orthonormal_column(u, j, fill_rng);
        }
    }
    return {std::move(u), std::move(s_sorted), v_sorted.transpose()};
}

}  // namespace

SvdResult svd(const Mat& a) {
    if (a.rows() == 0 || a.cols() == 0)
        throw ShapeMismatch("svd: empty matrix");
    if (!a.all_finite()) throw NumericalFailure("svd: non-finite input");
    if (a.rows() >= a.cols()) return svd_tall(a);
    // Wide matrix: A = (U' S V'^T)^T of A^T, so U = V', V = U'.
    SvdResult t = svd_tall(a.transpose());
    return {t.vt.transpose(), std::move(t.s), t.u.transpose()};
}

PolarResult polar_decompose(const Mat& a) {
    if (a.rows() < a.cols())
        throw ShapeMismatch("polar_decompose: requires rows >= cols");
    SvdResult sv = svd(a);
    Mat q = sv.u * sv.vt;
    Mat v = sv.vt.transpose();
    Mat p = v * Mat::diag(sv.s) * sv.vt;
    // symmetrize away rounding
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = i + 1; j < p.cols(); ++j) {
            const double avg = 0.5 * (p(i, j) + p(j, i));
            p(i, j) = avg;
            p(j, i) = avg;
        }
    return {std::move(q), std::move(p)};
}

Mat gram(const Mat& a) { return a.transpose() * a; }

std::vector<double> column_angles(const Mat& a) {
    const std::size_t d = a.cols();
    std::vector<double> norms(d);
    std::vector<std::size_t> degenerate;
    for (std::size_t j = 0; j < d; ++j) {
        double n2 = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) n2 += a(i, j) * a(i, j);
        norms[j] = std::sqrt(n2);
        if (norms[j] <= 1e-12) degenerate.push_back(j);
    }
    if (!degenerate.empty()) throw DegenerateColumn(std::move(degenerate));

    std::vector<double> angles;
    angles.reserve(d * (d - 1) / 2);
    constexpr double rad2deg = 180.0 / 3.14159265358979323846;
    for (std::size_t k = 0; k + 1 < d; ++k) {
        for (std::size_t l = k + 1; l < d; ++l) {
            double ip = 0.0;
            for (std::size_t i = 0; i < a.rows(); ++i) ip += a(i, k) * a(i, l);
            double c = ip / (norms[k] * norms[l]);
            c = std::clamp(c, -1.0, 1.0);
            angles.push_back(std::acos(c) * rad2deg);
        }
    }
    return angles;
}

Mat sample_stiefel(std::size_t m, std::size_t d, std::uint64_t seed) {
    if (m < d || d < 1) throw ShapeMismatch("sample_stiefel: need m >= d >= 1");
    Rng rng(seed);
    Mat g(m, d);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) g(i, j) = rng.gaussian();

    // Modified Gram-Schmidt with one re-orthogonalization pass. The R
    // diagonal is the residual norm, positive by construction, which is
    // exactly the sign convention that makes QR of a Gaussian Haar.
    Mat q = g;
    for (std::size_t j = 0; j < d; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                double proj = 0.0;
                for (std::size_t i = 0; i < m; ++i) proj += q(i, j) * q(i, k);
                for (std::size_t i = 0; i < m; ++i) q(i, j) -= proj * q(i, k);
            }
        }
        double norm2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) norm2 += q(i, j) * q(i, j);
        const double norm = std::sqrt(norm2);
        if (norm < 1e-300)
            throw NumericalFailure("sample_stiefel: degenerate Gaussian draw");
        for (std::size_t i = 0; i < m; ++i) q(i, j) /= norm;
    }
    return q;
}

SymEigResult sym_eig(const Mat& a) {
    if (a.rows() != a.cols()) throw ShapeMismatch("sym_eig: not square");
    const std::size_t n = a.rows();
    Mat d = a, v = Mat::identity(n);
    const double tol = 1e-14 * std::max(1.0, a.frobenius_norm());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q)
                off = std::max(off, std::fabs(d(p, q)));
        if (off <= tol) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(d(p, q)) <= tol) continue;
                const double theta = (d(q, q) - d(p, p)) / (2.0 * d(p, q));
                const double t =
                    (theta >= 0.0 ? 1.0 : -1.0) /
                    (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dip = d(i, p), diq = d(i, q);
                    d(i, p) = c * dip - s * diq;
                    d(i, q) = s * dip + c * diq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double dpi = d(p, i), dqi = d(q, i);
                    d(p, i) = c * dpi - s * dqi;
                    d(q, i) = s * dpi + c * dqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = d(i, i);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&vals](std::size_t i, std::size_t j) { return vals[i] < vals[j]; });
    SymEigResult out{std::vector<double>(n), Mat(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = vals[order[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

Mat sym_sqrt(const Mat& a) {
    SymEigResult eig = sym_eig(a);
    const std::size_t n = a.rows();
    std::vector<double> roots(n);
    for (std::size_t i = 0; i < n; ++i)
        roots[i] = std::sqrt(std::max(eig.values[i], 0.0));
    return eig.vectors * Mat::diag(roots) * eig.vectors.transpose();
}

}  // namespace ortho
