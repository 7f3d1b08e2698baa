#include "geoward/linalg.hpp"

#include "geoward/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace geoward {

namespace {
constexpr std::size_t kDimCap = 5000;
}

SymMatrix::SymMatrix(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0)
{
    if (dim == 0) throw invalid_input_error("SymMatrix: dimension must be >= 1");
    if (dim > kDimCap)
        throw capacity_error("SymMatrix: dim " + std::to_string(dim) +
                             " exceeds the dense cap of " + std::to_string(kDimCap));
}

double SymMatrix::trace() const
{
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += data_[i * dim_ + i];
    return t;
}

void SymMatrix::scale(double s)
{
    for (auto& v : data_) v *= s;
}

std::vector<double> SymMatrix::multiply(const std::vector<double>& x) const
{
    if (x.size() != dim_) throw invalid_input_error("SymMatrix::multiply: size mismatch");
    std::vector<double> y(dim_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i) {
        const double* r = row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

double dot(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& v)
{
    return std::sqrt(dot(v, v));
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y)
{
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

namespace {

// Applies the sign convention: largest-magnitude component positive, ties
// broken by lowest index.
void canonicalize_sign(std::vector<double>& v)
{
    std::size_t best = 0;
    double best_abs = -1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = std::fabs(v[i]);
        if (a > best_abs) {
            best_abs = a;
            best = i;
        }
    }
    if (v[best] < 0.0)
        for (auto& x : v) x = -x;
}

} // namespace

EigenDecomposition sym_eigen(const SymMatrix& input)
{
    const std::size_t n = input.dim();

    // Working copies: a is rotated toward diagonal, v accumulates rotations.
    std::vector<double> a = input.data();
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += a[p * n + q] * a[p * n + q];
        return std::sqrt(2.0 * s);
    };

    double scale = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) scale = std::max(scale, std::fabs(a[i]));
    const double stop = 1e-14 * std::max(scale, 1.0) * static_cast<double>(n);

    const int max_sweeps = 64;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        if (off_norm() <= stop) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::fabs(apq) <= 1e-300) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double tau = (aqq - app) / (2.0 * apq);
                // Smaller-root tangent keeps rotations stable.
                double t;
                if (tau >= 0.0)
                    t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
                else
                    t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if (sweep == max_sweeps && off_norm() > stop)
        throw numerical_failure_error("sym_eigen: Jacobi sweeps did not converge for dim " +
                                      std::to_string(n));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return a[i * n + i] > a[j * n + j];
    });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t col = order[k];
        out.eigenvalues[k] = a[col * n + col];
        std::vector<double> vec(n);
        for (std::size_t i = 0; i < n; ++i) vec[i] = v[i * n + col];
        canonicalize_sign(vec);
        out.eigenvectors[k] = std::move(vec);
    }
    return out;
}

namespace {

// In-place Cholesky of the packed lower triangle of B = A + mu*I.
// Returns false when a pivot collapses (singular within round-off).
bool cholesky(std::vector<double>& m, std::size_t n)
{
    double diag_scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag_scale = std::max(diag_scale, std::fabs(m[i * n + i]));
    const double tiny = 1e-14 * std::max(diag_scale, 1.0);

    for (std::size_t j = 0; j < n; ++j) {
        double d = m[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= m[j * n + k] * m[j * n + k];
        if (d <= tiny * tiny || !std::isfinite(d)) return false;
        const double lj = std::sqrt(d);
        m[j * n + j] = lj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= m[i * n + k] * m[j * n + k];
            m[i * n + j] = s / lj;
        }
    }
    return true;
}

std::vector<double> chol_solve(const std::vector<double>& l, std::size_t n,
                               const std::vector<double>& b)
{
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * y[k];
        y[i] = s / l[i * n + i];
    }
    std::vector<double> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * x[k];
        x[ii] = s / l[ii * n + ii];
    }
    return x;
}

} // namespace

std::vector<double> solve_shifted(const SymMatrix& a, double mu, const std::vector<double>& b)
{
    const std::size_t n = a.dim();
    if (b.size() != n) throw invalid_input_error("solve_shifted: rhs size mismatch");
    if (mu < 0.0) throw invalid_input_error("solve_shifted: mu must be >= 0");

    std::vector<double> shifted = a.data();
    for (std::size_t i = 0; i < n; ++i) shifted[i * n + i] += mu;

    std::vector<double> factor = shifted;
    if (!cholesky(factor, n)) {
        if (mu == 0.0)
            throw singular_matrix_error("solve_shifted: singular system at mu = 0 (dim " +
                                        std::to_string(n) + ")");
        throw numerical_failure_error("solve_shifted: factorization failed at mu = " +
                                      std::to_string(mu));
    }

    std::vector<double> x = chol_solve(factor, n, b);

    auto residual = [&](const std::vector<double>& sol) {
        std::vector<double> r = b;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += shifted[i * n + j] * sol[j];
            r[i] -= s;
        }
        return r;
    };

    const double bn = norm2(b);
    // Iterative refinement until the contract holds; two rounds suffice for
    // the condition numbers the QP produces.
    for (int pass = 0; pass < 3; ++pass) {
        std::vector<double> r = residual(x);
        if (norm2(r) <= 1e-9 * std::max(bn, 1e-300)) return x;
        std::vector<double> d = chol_solve(factor, n, r);
        axpy(1.0, d, x);
    }
    if (norm2(residual(x)) > 1e-9 * std::max(bn, 1e-300))
        throw numerical_failure_error("solve_shifted: residual above tolerance after refinement");
    return x;
}

} // namespace geoward
