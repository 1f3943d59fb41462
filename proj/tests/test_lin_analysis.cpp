#include <gtest/gtest.h>

#include <random>

#include "shslab/errors.hpp"
#include "shslab/lin_analysis.hpp"
#include "shslab/probing.hpp"
#include "test_support.hpp"

using namespace shslab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_stable(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = g(rng);
    // shift the spectrum into the left half-plane
    const double shift = Eigen::EigenSolver<MatrixXd>(M).eigenvalues().real().maxCoeff() + 0.5;
    return M - shift * MatrixXd::Identity(n, n);
}

MatrixXd random_matrix(int r, int c, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    MatrixXd M(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) M(i, j) = g(rng);
    return M;
}

double rel(const MatrixXd& a, const MatrixXd& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

} // namespace

TEST(Eigen, DiagonalSpectrumSorted) {
    MatrixXd A(2, 2);
    A << -1, 0, 0, -2;
    const auto e = eigenvalues(A);
    ASSERT_EQ(e.size(), 2u);
    EXPECT_DOUBLE_EQ(e[0].real(), -2.0);
    EXPECT_DOUBLE_EQ(e[1].real(), -1.0);
}

TEST(Eigen, RlStampDoubleRoot) {
    // R = 1, L = 1, omega = 0: both axes decay at rate R/L
    MatrixXd A(2, 2);
    A << -1.0 / 1.0, 0.0, 0.0, -1.0 / 1.0;
    const auto e = eigenvalues(A);
    for (const auto& z : e) {
        EXPECT_DOUBLE_EQ(z.real(), -1.0);
        EXPECT_DOUBLE_EQ(z.imag(), 0.0);
    }
}

TEST(Eigen, BundledScenariosAreHurwitz) {
    for (const auto& fam : fixtures::bundled_families()) {
        for (const auto& s : fam.scenarios) {
            EXPECT_TRUE(is_hurwitz(s)) << "segment " << fam.segment_id << " " << s.name;
            EXPECT_LT(max_real_part(eigenvalues(s)), 0.0);
        }
    }
}

TEST(Eigen, NonFiniteInputRejected) {
    MatrixXd A = MatrixXd::Identity(2, 2);
    A(0, 1) = std::nan("");
    EXPECT_THROW(eigenvalues(A), NumericalError);
}

TEST(Equilibrium, ZeroInputsGiveZero) {
    const auto& m = fixtures::monitored_family()[0];
    const VectorXd x = equilibrium(m, VectorXd::Zero(3), VectorXd::Zero(m.n_u2()));
    EXPECT_EQ(x.norm(), 0.0);
}

TEST(Equilibrium, ScalarArithmetic) {
    StateSpaceModel m;
    m.A = MatrixXd::Constant(1, 1, -2.0);
    m.B1 = MatrixXd::Constant(1, 1, 1.0);
    m.B2 = MatrixXd::Zero(1, 0);
    const VectorXd x = equilibrium(m, VectorXd::Constant(1, 4.0), VectorXd::Zero(0));
    EXPECT_DOUBLE_EQ(x(0), 2.0);
}

TEST(Equilibrium, BundledSegmentWithAuxVoltage) {
    for (const auto& s : fixtures::monitored_family().scenarios) {
        const VectorXd u1 = Eigen::Vector3d(0.0, 0.01, 0.0);
        const VectorXd u2 = Eigen::Vector2d(50.0, -20.0);
        const VectorXd x = equilibrium(s, u1, u2);
        ASSERT_TRUE(x.allFinite());
        const VectorXd forcing = s.B1 * u1 + s.B2 * u2;
        const VectorXd residual = s.A * x + forcing;
        // residual measured against the size of the terms that cancel
        const VectorXd scale = s.A.cwiseAbs() * x.cwiseAbs() + forcing.cwiseAbs();
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            EXPECT_LE(std::abs(residual(i)), 1e-10 * std::max(scale(i), 1e-300)) << s.name << " row " << i;
        }
    }
}

TEST(Equilibrium, SingularMatrixRejected) {
    StateSpaceModel m;
    m.A = MatrixXd::Zero(2, 2);
    m.B1 = MatrixXd::Zero(2, 1);
    m.B2 = MatrixXd::Zero(2, 0);
    EXPECT_THROW(equilibrium(m, VectorXd::Zero(1), VectorXd::Zero(0)), NumericalError);
}

TEST(Zoh, IntegratorClosedForm) {
    const auto d = discretize_zoh(MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 0),
                                  MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 0), 0.001);
    EXPECT_DOUBLE_EQ(d.Ad(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(d.Bd1(0, 0), 0.001);
}

TEST(Zoh, FirstOrderClosedForm) {
    const auto d = discretize_zoh(MatrixXd::Constant(1, 1, -1.0), MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 0),
                                  MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 0), 1.0);
    EXPECT_NEAR(d.Ad(0, 0), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(d.Bd1(0, 0), 1.0 - std::exp(-1.0), 1e-15);
}

TEST(Zoh, SemigroupOnRandomStableSystems) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const MatrixXd A = random_stable(5, rng);
        const MatrixXd B1 = random_matrix(5, 3, rng);
        const MatrixXd B2 = random_matrix(5, 2, rng);
        const MatrixXd C = random_matrix(2, 5, rng);
        const MatrixXd D2 = MatrixXd::Zero(2, 2);
        const double ts = 0.05 * (1 + trial);
        const auto half = discretize_zoh(A, B1, B2, C, D2, ts / 2);
        const auto full = discretize_zoh(A, B1, B2, C, D2, ts);
        EXPECT_LE(rel(half.Ad * half.Ad, full.Ad), 1e-10);
        // holding the input over both halves equals holding it over the whole step
        EXPECT_LE(rel(half.Ad * half.Bd1 + half.Bd1, full.Bd1), 1e-10);
        EXPECT_LE(rel(half.Ad * half.Bd2 + half.Bd2, full.Bd2), 1e-10);
    }
}

TEST(Zoh, SemigroupOnBundledFamily) {
    for (const auto& s : fixtures::monitored_family().scenarios) {
        const auto half = discretize_zoh(s, 0.5e-6);
        const auto full = discretize_zoh(s, 1e-6);
        EXPECT_LE(rel(half.Ad * half.Ad, full.Ad), 1e-10) << s.name;
        EXPECT_LE(rel(half.Ad * half.Bd1 + half.Bd1, full.Bd1), 1e-10) << s.name;
    }
}

TEST(Simulate, ZeroInZeroOut) {
    const auto d = discretize_zoh(fixtures::monitored_family()[1], 1e-6);
    const auto tr = simulate(d, VectorXd::Zero(d.n()), MatrixXd::Zero(3, 100), MatrixXd::Zero(2, 100), 100);
    EXPECT_EQ(tr.size(), 100);
    EXPECT_EQ(tr.outputs.norm(), 0.0);
    EXPECT_EQ(tr.final_state.norm(), 0.0);
}

TEST(Simulate, Linearity) {
    std::mt19937_64 rng(3);
    const auto d = discretize_zoh(fixtures::monitored_family()[0], 1e-6);
    const int N = 500;
    const VectorXd x0 = random_matrix(d.n(), 1, rng), x1 = random_matrix(d.n(), 1, rng);
    const MatrixXd u0 = random_matrix(3, N, rng) * 1e-2, u1 = random_matrix(3, N, rng) * 1e-2;
    const MatrixXd w0 = random_matrix(2, N, rng), w1 = random_matrix(2, N, rng);
    const auto a = simulate(d, x0, u0, w0, N, true);
    const auto b = simulate(d, x1, u1, w1, N, true);
    const auto c = simulate(d, x0 + x1, u0 + u1, w0 + w1, N, true);
    EXPECT_LE(rel(a.outputs + b.outputs, c.outputs), 1e-12);
    EXPECT_LE(rel(a.states + b.states, c.states), 1e-12);
}

TEST(Simulate, ProbeStepEqualsZeroInitialResponse) {
    const auto& m = fixtures::monitored_family()[2];
    const auto step = step_response(m, ProbeChannel::Delta, 0.001, 1e-6);
    const auto d = discretize_zoh(m, 1e-6);
    const int N = 1001;
    MatrixXd u1 = MatrixXd::Zero(3, N);
    u1.row(1).setOnes();
    const auto tr = simulate(d, VectorXd::Zero(m.n()), u1, MatrixXd::Zero(2, N), N);
    EXPECT_EQ(step.size(), N);
    EXPECT_TRUE((tr.outputs.array() == step.outputs.array()).all());
    EXPECT_TRUE(tr.aggregate.isApprox(tr.outputs.colwise().sum().transpose()));
}

TEST(Simulate, AgreesWithFineStepRungeKutta) {
    // 10 ms window, probe held on delta, nonzero initial state and aux voltage
    std::mt19937_64 rng(11);
    const double ts = 1e-6, h = 1e-7, tau0 = 0.01;
    const long N = std::lround(tau0 / ts);
    for (const auto& s : fixtures::monitored_family().scenarios) {
        const VectorXd x0 = random_matrix(s.n(), 1, rng);
        const Eigen::Vector3d u(0.0, 0.5, 0.0);
        const Eigen::Vector2d w(3.0, -1.0);
        const auto d = discretize_zoh(s, ts);
        MatrixXd U = u.replicate(1, N), W = w.replicate(1, N);
        const auto tr = simulate(d, x0, U, W, N, true);

        // checkpoints every millisecond
        VectorXd x = x0;
        const long per = std::lround(1e-3 / h);
        const VectorXd b = s.B1 * u + s.B2 * w;
        for (long c = 1; c <= 10; ++c) {
            x = fixtures::rk4(s.A, b, x, h, per);
            const long k = c * std::lround(1e-3 / ts);
            const VectorXd zoh = k < N ? VectorXd(tr.states.col(k)) : tr.final_state;
            EXPECT_LE((zoh - x).norm() / x.norm(), 1e-6) << s.name << " at " << c << " ms";
            const VectorXd y_rk = s.C * x + s.D2 * w;
            const VectorXd y_zoh = s.C * zoh + s.D2 * w;
            EXPECT_LE((y_zoh - y_rk).norm() / y_rk.norm(), 1e-6) << s.name << " at " << c << " ms";
        }
    }
}

TEST(Simulate, RejectsShortInputs) {
    const auto d = discretize_zoh(fixtures::monitored_family()[0], 1e-6);
    EXPECT_ANY_THROW(simulate(d, VectorXd::Zero(d.n()), MatrixXd::Zero(3, 5), MatrixXd::Zero(2, 5), 10));
}
