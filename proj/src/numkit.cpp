#include "ffrelay/numkit.hpp"

#include <cmath>
#include <numbers>

namespace ffrelay::numkit {

namespace {

cplx unit_root(Index n, Index power) {
    // reduce first so the angle stays in [0, 2pi)
    const Index reduced = ((power % n) + n) % n;
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(reduced) / static_cast<double>(n);
    return {std::cos(angle), std::sin(angle)};
}

}  // namespace

CMatrix toeplitz_filter(const CVector& taps, Index rows) {
    if (taps.size() < 1) {
        throw DimensionError("toeplitz_filter: tap vector must be non-empty");
    }
    if (rows < 1) {
        throw DimensionError("toeplitz_filter: row count must be positive");
    }
    const Index len = taps.size();
    CMatrix out = CMatrix::Zero(rows, rows + len - 1);
    for (Index r = 0; r < rows; ++r) {
        out.row(r).segment(r, len) = taps.transpose();
    }
    return out;
}

CVector circulant_eigenvalues(const CVector& first_row) {
    const Index n = first_row.size();
    if (n < 1) {
        throw DimensionError("circulant_eigenvalues: empty first row");
    }
    CVector lambda(n);
    for (Index k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        for (Index m = 0; m < n; ++m) {
            acc += first_row(m) * unit_root(n, -k * m);
        }
        lambda(k) = acc;
    }
    return lambda;
}

CMatrix circulant(const CVector& first_row) {
    const Index n = first_row.size();
    if (n < 1) {
        throw DimensionError("circulant: empty first row");
    }
    CMatrix c(n, n);
    for (Index a = 0; a < n; ++a) {
        for (Index b = 0; b < n; ++b) {
            c(a, b) = first_row(((b - a) % n + n) % n);
        }
    }
    return c;
}

DftRows dft_rows(Index n, Index ext) {
    if (n < 2) {
        throw DimensionError("dft_rows: N must be at least 2");
    }
    if (ext < 0 || ext > n) {
        throw DimensionError("dft_rows: cyclic extension must lie in [0, N]");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    DftRows out;
    out.idft.resize(n, n);
    for (Index a = 0; a < n; ++a) {
        for (Index b = 0; b < n; ++b) {
            out.idft(a, b) = scale * unit_root(n, a * b);
        }
    }
    out.cp_extended.resize(n + ext, n);
    for (Index i = 0; i < n + ext; ++i) {
        out.cp_extended.row(i) = out.idft.row(n - 1 - (i % n));
    }
    return out;
}

bool is_hermitian(const CMatrix& a, double rel_tol) {
    if (a.rows() != a.cols()) {
        return false;
    }
    const double scale = a.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        return true;
    }
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

CMatrix hermitian_part(const CMatrix& a) {
    return 0.5 * (a + a.adjoint());
}

HermitianEig hermitian_eig(const CMatrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("hermitian_eig: matrix must be square");
    }
    if (!is_hermitian(a)) {
        throw ContractViolation("hermitian_eig: matrix is not Hermitian within 1e-12");
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(a));
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("hermitian_eig: eigensolver did not converge");
    }
    HermitianEig out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

double quad_form(const CMatrix& a, const CVector& x) {
    return (x.adjoint() * a * x)(0, 0).real();
}

}  // namespace ffrelay::numkit
