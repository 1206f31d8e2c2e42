#include "ffrelay/solvers/lp.hpp"

#include <cmath>
#include <limits>

namespace ffrelay::solvers {

using numkit::Index;
using numkit::RMatrix;
using numkit::RVector;

namespace {

constexpr double kEps = 1e-10;

// Tableau rows 0..m-1 hold constraints, the last column is the rhs.
// obj holds reduced costs for maximization (enter on positive entries).
class Tableau {
public:
    Tableau(RMatrix t, std::vector<Index> basis) : t_(std::move(t)), basis_(std::move(basis)) {}

    RMatrix& data() { return t_; }
    std::vector<Index>& basis() { return basis_; }
    Index rows() const { return t_.rows(); }
    Index rhs_col() const { return t_.cols() - 1; }

    void pivot(Index row, Index col, RVector& obj) {
        t_.row(row) /= t_(row, col);
        for (Index i = 0; i < t_.rows(); ++i) {
            if (i != row && t_(i, col) != 0.0) {
                t_.row(i) -= t_(i, col) * t_.row(row);
            }
        }
        if (obj(col) != 0.0) {
            obj -= obj(col) * t_.row(row).transpose();
        }
        basis_[row] = col;
    }

    // Bland's rule; `allowed` limits entering columns. Returns false when unbounded.
    bool optimize(RVector& obj, Index allowed) {
        const double scale = 1.0 + t_.cwiseAbs().maxCoeff();
        for (;;) {
            Index enter = -1;
            for (Index j = 0; j < allowed; ++j) {
                if (obj(j) > kEps * scale) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) {
                return true;
            }
            Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < t_.rows(); ++i) {
                const double a = t_(i, enter);
                if (a > kEps) {
                    const double ratio = t_(i, rhs_col()) / a;
                    if (ratio < best - kEps || (std::abs(ratio - best) <= kEps && basis_[i] < basis_[leave])) {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) {
                return false;
            }
            pivot(leave, enter, obj);
        }
    }

private:
    RMatrix t_;
    std::vector<Index> basis_;
};

}  // namespace

LpResult solve_lp(const RVector& c, const std::vector<LpConstraint>& constraints) {
    const Index n = c.size();
    const Index m = static_cast<Index>(constraints.size());
    for (const auto& con : constraints) {
        if (con.a.size() != n) {
            throw numkit::DimensionError("solve_lp: constraint length differs from objective length");
        }
    }

    // normalize to nonnegative rhs
    std::vector<LpConstraint> rows = constraints;
    for (auto& row : rows) {
        if (row.b < 0.0) {
            row.a = -row.a;
            row.b = -row.b;
            if (row.sense == LpSense::le) {
                row.sense = LpSense::ge;
            } else if (row.sense == LpSense::ge) {
                row.sense = LpSense::le;
            }
        }
    }

    Index nslack = 0;
    Index nart = 0;
    for (const auto& row : rows) {
        nslack += (row.sense == LpSense::eq) ? 0 : 1;
        nart += (row.sense == LpSense::le) ? 0 : 1;
    }
    const Index total = n + nslack + nart;
    RMatrix t = RMatrix::Zero(m, total + 1);
    std::vector<Index> basis(m);
    Index slack = n;
    Index art = n + nslack;
    for (Index i = 0; i < m; ++i) {
        t.row(i).head(n) = rows[i].a.transpose();
        t(i, total) = rows[i].b;
        switch (rows[i].sense) {
            case LpSense::le:
                t(i, slack) = 1.0;
                basis[i] = slack++;
                break;
            case LpSense::ge:
                t(i, slack++) = -1.0;
                t(i, art) = 1.0;
                basis[i] = art++;
                break;
            case LpSense::eq:
                t(i, art) = 1.0;
                basis[i] = art++;
                break;
        }
    }
    Tableau tab(t, basis);

    LpResult result;
    result.x = RVector::Zero(n);

    if (nart > 0) {
        // phase 1: maximize -sum(artificials), priced out against the basis
        RVector obj = RVector::Zero(total + 1);
        obj.segment(n + nslack, nart).setConstant(-1.0);
        for (Index i = 0; i < m; ++i) {
            if (tab.basis()[i] >= n + nslack) {
                obj += tab.data().row(i).transpose();
            }
        }
        tab.optimize(obj, total);
        const double scale = 1.0 + tab.data().col(total).cwiseAbs().maxCoeff();
        if (obj(total) > 1e-9 * scale) {
            result.status = LpStatus::infeasible;
            return result;
        }
        // drive zero-level artificials out of the basis
        for (Index i = 0; i < tab.rows(); ++i) {
            if (tab.basis()[i] < n + nslack) {
                continue;
            }
            for (Index j = 0; j < n + nslack; ++j) {
                if (std::abs(tab.data()(i, j)) > 1e-9) {
                    RVector dummy = RVector::Zero(total + 1);
                    tab.pivot(i, j, dummy);
                    break;
                }
            }
        }
    }

    // phase 2 on the structural and slack columns
    RVector obj = RVector::Zero(total + 1);
    obj.head(n) = c;
    for (Index i = 0; i < tab.rows(); ++i) {
        const Index b = tab.basis()[i];
        if (obj(b) != 0.0) {
            obj -= obj(b) * tab.data().row(i).transpose();
        }
    }
    // remaining basic artificials sit in redundant rows at level zero; keep them out of pricing
    if (!tab.optimize(obj, n + nslack)) {
        result.status = LpStatus::unbounded;
        return result;
    }
    for (Index i = 0; i < tab.rows(); ++i) {
        if (tab.basis()[i] < n) {
            result.x(tab.basis()[i]) = std::max(0.0, tab.data()(i, total));
        }
    }
    result.objective = c.dot(result.x);
    result.status = LpStatus::optimal;
    return result;
}

}  // namespace ffrelay::solvers
