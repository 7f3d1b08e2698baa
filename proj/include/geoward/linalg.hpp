#pragma once

#include <cstddef>
#include <vector>

namespace geoward {

// Dense symmetric matrix, row-major, 64-bit. Writes through set() mirror the
// transposed entry so storage stays exactly symmetric.
class SymMatrix {
public:
    explicit SymMatrix(std::size_t dim);

    std::size_t dim() const { return dim_; }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }
    void set(std::size_t i, std::size_t j, double v)
    {
        data_[i * dim_ + j] = v;
        data_[j * dim_ + i] = v;
    }
    void add(std::size_t i, std::size_t j, double v)
    {
        data_[i * dim_ + j] += v;
        if (i != j) data_[j * dim_ + i] += v;
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }
    double* row(std::size_t i) { return data_.data() + i * dim_; }
    const double* row(std::size_t i) const { return data_.data() + i * dim_; }

    double trace() const;
    void scale(double s);

    // Symmetric matrix-vector product.
    std::vector<double> multiply(const std::vector<double>& x) const;

private:
    std::size_t dim_;
    std::vector<double> data_;
};

struct EigenDecomposition {
    // Descending eigenvalues and the matching orthonormal eigenvectors.
    // eigenvectors[k] is the k-th eigenvector (length dim).
    std::vector<double> eigenvalues;
    std::vector<std::vector<double>> eigenvectors;

    std::size_t dim() const { return eigenvalues.size(); }
};

// Cyclic Jacobi eigendecomposition. Deterministic: fixed sweep order,
// single-threaded, sign convention = largest-magnitude component positive
// (ties broken by lowest index). Throws numerical_failure_error if the
// off-diagonal mass has not converged after the sweep budget.
EigenDecomposition sym_eigen(const SymMatrix& a);

// Solves (A + mu*I) x = b by Cholesky with one round of iterative
// refinement. mu > 0 makes the system definite for PSD A; a singular system
// at mu = 0 raises singular_matrix_error. The residual is verified on every
// call: ||(A+mu I)x - b|| <= 1e-9 ||b||.
std::vector<double> solve_shifted(const SymMatrix& a, double mu, const std::vector<double>& b);

// Small helpers shared across modules.
double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& v);
void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y);

} // namespace geoward
