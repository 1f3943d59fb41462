#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "shslab/ssbuild.hpp"

namespace shslab {

/// Zero-order-hold discretization of a StateSpaceModel.
struct DiscreteStateSpace {
    Eigen::MatrixXd Ad, Bd1, Bd2, C, D2;
    double ts = 0.0;

    int n() const { return static_cast<int>(Ad.rows()); }
    int p() const { return static_cast<int>(C.rows()); }
};

/// Uniformly sampled response. Column k of each matrix is sample k.
struct ResponseTrace {
    double t0 = 0.0;
    double ts = 0.0;
    Eigen::MatrixXd outputs;     ///< p x N
    Eigen::MatrixXd states;      ///< n x N, empty unless requested
    Eigen::VectorXd aggregate;   ///< N, sum of output components per sample
    Eigen::VectorXd final_state; ///< x_N, the state after the last input step

    Eigen::Index size() const { return outputs.cols(); }
    double time(Eigen::Index k) const { return t0 + static_cast<double>(k) * ts; }
};

/// Eigenvalues sorted by real part, then imaginary part. Throws NumericalError if the
/// solver fails or A has non-finite entries.
std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& A);
std::vector<std::complex<double>> eigenvalues(const StateSpaceModel& model);

double max_real_part(const std::vector<std::complex<double>>& eigs);
bool is_hurwitz(const StateSpaceModel& model);

/// x* = -A^{-1}(B1 u1 + B2 u2). Throws NumericalError for singular A.
Eigen::VectorXd equilibrium(const StateSpaceModel& model, const Eigen::VectorXd& u1, const Eigen::VectorXd& u2);

/// Exact ZOH via the exponential of the augmented matrix [[A B1 B2]; [0 0 0]] * ts.
DiscreteStateSpace discretize_zoh(const StateSpaceModel& model, double ts);
DiscreteStateSpace discretize_zoh(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B1, const Eigen::MatrixXd& B2,
                                  const Eigen::MatrixXd& C, const Eigen::MatrixXd& D2, double ts);

/// x_{k+1} = Ad x_k + Bd1 u1_k + Bd2 u2_k, y_k = C x_k + D2 u2_k for k = 0 .. steps-1.
/// u1 and u2 hold one column per step and need at least `steps` columns (a zero-row u2
/// is accepted for models without aux inputs).
ResponseTrace simulate(const DiscreteStateSpace& model, const Eigen::VectorXd& x0, const Eigen::MatrixXd& u1,
                       const Eigen::MatrixXd& u2, Eigen::Index steps, bool keep_states = false, double t0 = 0.0);

} // namespace shslab
