#include "shslab/experiment.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <random>

#include "shslab/errors.hpp"

namespace shslab {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

bool whole_ratio(double num, double den) {
    const double r = num / den;
    return std::isfinite(r) && std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, std::abs(r));
}

// noise and disturbance draws use a stream separate from the switching sequence
constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ULL;

} // namespace

void ExperimentConfig::validate() const {
    if (!(tau > 0.0 && tau0 > 0.0 && ts > 0.0 && ts_relax > 0.0)) {
        throw ValidationError("experiment: tau, tau0, ts and ts_relax must be positive");
    }
    if (tau0 > tau / 10.0) {
        throw ValidationError("experiment: detection window tau0 must be <= tau/10");
    }
    if (K < 1) {
        throw ValidationError("experiment: K must be >= 1");
    }
    if (!whole_ratio(tau0, ts) || !whole_ratio(tau, ts)) {
        throw ValidationError("experiment: tau0 and tau must be whole multiples of ts");
    }
    if (!whole_ratio(tau - tau0, ts_relax)) {
        throw ValidationError("experiment: tau - tau0 must be a whole multiple of ts_relax");
    }
    if (!(noise_sigma >= 0.0 && disturbance_sigma >= 0.0 && probe_magnitude >= 0.0)) {
        throw ValidationError("experiment: noise, disturbance and probe magnitude must be >= 0");
    }
}

Index ExperimentConfig::window_samples() const { return static_cast<Index>(std::llround(tau0 / ts)) + 1; }

Index ExperimentConfig::relax_steps() const { return static_cast<Index>(std::llround((tau - tau0) / ts_relax)); }

SwitchingSequence generate_sequence(const ExperimentConfig& config, std::size_t scenario_count) {
    if (scenario_count == 0) {
        throw ValidationError("generate_sequence: empty scenario set");
    }
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick(0, scenario_count - 1);
    SwitchingSequence s;
    s.alphas.reserve(config.K);
    for (std::size_t k = 0; k < config.K; ++k) {
        s.alphas.push_back(pick(rng));
    }
    return s;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ScenarioFamily& family,
                                const SwitchingSequence& sequence) {
    config.validate();
    family.check_uniform();
    if (sequence.alphas.size() != config.K) {
        throw ValidationError("run_experiment: sequence length differs from K");
    }
    for (auto a : sequence.alphas) {
        if (a >= family.size()) {
            throw ValidationError("run_experiment: sequence references scenario " + std::to_string(a) +
                                  " outside the family");
        }
    }

    std::vector<DiscreteStateSpace> fine, coarse;
    std::vector<bool> stable;
    for (const auto& s : family.scenarios) {
        fine.push_back(discretize_zoh(s, config.ts));
        coarse.push_back(discretize_zoh(s, config.ts_relax));
        stable.push_back(is_hurwitz(s));
    }

    const auto& ref = family[0];
    const Index n = ref.n();
    const Index m2 = ref.n_u2();
    const Index N = config.window_samples();
    const Index relax = config.relax_steps();

    std::mt19937_64 noise_rng(config.seed ^ kNoiseStream);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto disturbance = [&](Index cols) {
        MatrixXd u2 = MatrixXd::Zero(m2, cols);
        if (config.disturbance_sigma > 0.0) {
            for (Index j = 0; j < cols; ++j) {
                for (Index i = 0; i < m2; ++i) {
                    u2(i, j) = config.disturbance_sigma * gauss(noise_rng);
                }
            }
        }
        return u2;
    };

    Eigen::Vector3d probe = Eigen::Vector3d::Zero();
    probe(static_cast<int>(config.channel)) = config.probe_magnitude;

    ExperimentResult result;
    result.truth = sequence;
    result.windows.reserve(config.K);
    VectorXd x = VectorXd::Zero(n);

    for (std::size_t k = 0; k < config.K; ++k) {
        const auto alpha = sequence.alphas[k];
        if (!stable[alpha]) {
            throw NumericalError("interval " + std::to_string(k) + ": scenario '" + family[alpha].name +
                                 "' is not Hurwitz, simulation would diverge");
        }
        result.boundary_states.push_back(x);
        const double t0 = static_cast<double>(k) * config.tau;

        // probe on for samples 0 .. N-2, i.e. [t0, t0 + tau0)
        MatrixXd u1 = MatrixXd::Zero(3, N);
        u1.leftCols(N - 1).colwise() = probe;
        MeasurementWindow w;
        w.t_start = t0;
        w.ts = config.ts;
        w.u1 = std::move(u1);
        w.u2 = disturbance(N);
        auto trace = simulate(fine[alpha], x, w.u1, w.u2, N, true, t0);
        w.outputs = std::move(trace.outputs);
        if (config.noise_sigma > 0.0) {
            for (Index j = 0; j < w.outputs.cols(); ++j) {
                for (Index i = 0; i < w.outputs.rows(); ++i) {
                    w.outputs(i, j) += config.noise_sigma * gauss(noise_rng);
                }
            }
        }
        x = trace.states.col(N - 1);  // state at t0 + tau0

        const MatrixXd u1_off = MatrixXd::Zero(3, relax);
        x = simulate(coarse[alpha], x, u1_off, disturbance(relax), relax).final_state;
        if (!x.allFinite()) {
            throw NumericalError("interval " + std::to_string(k) + ": simulation diverged");
        }
        result.windows.push_back(std::move(w));
    }
    result.boundary_states.push_back(x);

    const Detector detector(family, config.ts, N, config.estimator);
    result.report = detector.detect_sequence(result.windows, sequence.alphas);
    return result;
}

EigenReport eigen_report(const ScenarioFamily& family) {
    EigenReport report;
    report.all_stable = true;
    double most_negative = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < family.size(); ++i) {
        ScenarioSpectrum s;
        s.alpha = i;
        s.name = family[i].name;
        s.eigenvalues = eigenvalues(family[i]);
        s.max_real = max_real_part(s.eigenvalues);
        s.stable = s.max_real < 0.0;
        report.all_stable = report.all_stable && s.stable;
        if (s.max_real < most_negative) {
            most_negative = s.max_real;
            report.most_damped = i;
        }
        report.spectra.push_back(std::move(s));
    }
    return report;
}

} // namespace shslab
