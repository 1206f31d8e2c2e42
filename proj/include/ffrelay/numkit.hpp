#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

// Time-domain vectors are stacked in descending time order throughout: slot 0
// holds the latest sample. toeplitz_filter(v, rows) * x then gives
// y[a] = sum_l v[l] x[a+l], the convolution output at time (len-1-a).
namespace ffrelay::numkit {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown when operand sizes are inconsistent with an operation.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an input violates a documented precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// rows x (rows+L-1) Toeplitz matrix with first row [v^T, 0, ..., 0]; every
/// following row is the previous one shifted right by one column.
CMatrix toeplitz_filter(const CVector& taps, Index rows);

/// Eigenvalues lambda_k = sum_n c(n) w^{-kn}, w = exp(j 2 pi / N), of the N x N
/// circulant matrix whose first row is c. The matching right eigenvector is
/// xi_k = N^{-1/2} [1, w^{-k}, ..., w^{-(N-1)k}]^T.
CVector circulant_eigenvalues(const CVector& first_row);

/// Explicit circulant matrix C(a, b) = c((b - a) mod N).
CMatrix circulant(const CVector& first_row);

struct DftRows {
    /// Normalized IDFT matrix, entry (a, b) = w^{ab} / sqrt(N). Row k is w_k^T.
    CMatrix idft;
    /// Cyclic-prefix extended rows [w_{N-1}, ..., w_0, w_{N-1}, ..., w_{N-ext}]^T.
    CMatrix cp_extended;
};

/// Builds W_N and its cyclic-prefix extension with `ext` wrapped rows.
DftRows dft_rows(Index n, Index ext);

struct HermitianEig {
    RVector values;   ///< descending
    CMatrix vectors;  ///< column i pairs with values(i)
};

/// true when |A - A^H| <= rel_tol * max|A_ij| elementwise.
bool is_hermitian(const CMatrix& a, double rel_tol = 1e-12);

/// (A + A^H) / 2
CMatrix hermitian_part(const CMatrix& a);

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized before
/// factorization; a non-Hermitian input (beyond 1e-12 relative) throws
/// ContractViolation.
HermitianEig hermitian_eig(const CMatrix& a);

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Real quadratic form Re(x^H A x).
double quad_form(const CMatrix& a, const CVector& x);

}  // namespace ffrelay::numkit
