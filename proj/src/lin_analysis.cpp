#include "shslab/lin_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "shslab/errors.hpp"

namespace shslab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<std::complex<double>> eigenvalues(const MatrixXd& A) {
    if (A.rows() != A.cols()) {
        throw NumericalError("eigenvalues: matrix is not square");
    }
    if (!A.allFinite()) {
        throw NumericalError("eigenvalues: matrix has non-finite entries");
    }
    Eigen::EigenSolver<MatrixXd> solver(A, false);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigenvalues: QR iteration did not converge");
    }
    const auto& ev = solver.eigenvalues();
    std::vector<std::complex<double>> out(ev.data(), ev.data() + ev.size());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return out;
}

std::vector<std::complex<double>> eigenvalues(const StateSpaceModel& model) { return eigenvalues(model.A); }

double max_real_part(const std::vector<std::complex<double>>& eigs) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& e : eigs) {
        m = std::max(m, e.real());
    }
    return m;
}

bool is_hurwitz(const StateSpaceModel& model) { return max_real_part(eigenvalues(model)) < 0.0; }

VectorXd equilibrium(const StateSpaceModel& model, const VectorXd& u1, const VectorXd& u2) {
    if (u1.size() != model.n_u1() || u2.size() != model.n_u2()) {
        throw NumericalError("equilibrium: input dimension mismatch");
    }
    Eigen::FullPivLU<MatrixXd> lu(model.A);
    if (!lu.isInvertible()) {
        throw NumericalError("equilibrium: A is singular");
    }
    const VectorXd rhs = model.B1 * u1 + model.B2 * u2;
    VectorXd x = lu.solve(-rhs);
    // one refinement step keeps the residual at rounding level for stiff A
    x += lu.solve(-(model.A * x + rhs));
    return x;
}

DiscreteStateSpace discretize_zoh(const MatrixXd& A, const MatrixXd& B1, const MatrixXd& B2, const MatrixXd& C,
                                  const MatrixXd& D2, double ts) {
    if (!std::isfinite(ts) || ts <= 0.0) {
        throw NumericalError("discretize_zoh: sample period must be positive and finite");
    }
    const auto n = A.rows();
    const auto m1 = B1.cols();
    const auto m2 = B2.cols();
    MatrixXd aug = MatrixXd::Zero(n + m1 + m2, n + m1 + m2);
    aug.topLeftCorner(n, n) = A * ts;
    aug.block(0, n, n, m1) = B1 * ts;
    aug.block(0, n + m1, n, m2) = B2 * ts;
    const MatrixXd e = aug.exp();
    if (!e.allFinite()) {
        throw NumericalError("discretize_zoh: matrix exponential overflowed");
    }
    DiscreteStateSpace d;
    d.Ad = e.topLeftCorner(n, n);
    d.Bd1 = e.block(0, n, n, m1);
    d.Bd2 = e.block(0, n + m1, n, m2);
    d.C = C;
    d.D2 = D2;
    d.ts = ts;
    return d;
}

DiscreteStateSpace discretize_zoh(const StateSpaceModel& model, double ts) {
    return discretize_zoh(model.A, model.B1, model.B2, model.C, model.D2, ts);
}

ResponseTrace simulate(const DiscreteStateSpace& model, const VectorXd& x0, const MatrixXd& u1, const MatrixXd& u2,
                       Eigen::Index steps, bool keep_states, double t0) {
    const auto n = model.Ad.rows();
    if (x0.size() != n || u1.rows() != model.Bd1.cols() || u2.rows() != model.Bd2.cols()) {
        throw NumericalError("simulate: dimension mismatch");
    }
    if (u1.cols() < steps || (model.Bd2.cols() > 0 && u2.cols() < steps) || steps < 0) {
        throw NumericalError("simulate: input sequences shorter than the requested number of steps");
    }
    const bool has_u2 = model.Bd2.cols() > 0;
    ResponseTrace trace;
    trace.t0 = t0;
    trace.ts = model.ts;
    trace.outputs.resize(model.C.rows(), steps);
    if (keep_states) {
        trace.states.resize(n, steps);
    }
    VectorXd x = x0;
    VectorXd next(n);
    for (Eigen::Index k = 0; k < steps; ++k) {
        trace.outputs.col(k).noalias() = model.C * x;
        if (has_u2) {
            trace.outputs.col(k).noalias() += model.D2 * u2.col(k);
        }
        if (keep_states) {
            trace.states.col(k) = x;
        }
        next.noalias() = model.Ad * x;
        next.noalias() += model.Bd1 * u1.col(k);
        if (has_u2) {
            next.noalias() += model.Bd2 * u2.col(k);
        }
        x.swap(next);
    }
    trace.aggregate = trace.outputs.colwise().sum().transpose();
    trace.final_state = x;
    return trace;
}

} // namespace shslab
