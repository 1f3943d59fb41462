#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shslab/detection.hpp"
#include "shslab/probing.hpp"
#include "shslab/ssbuild.hpp"

namespace shslab {

struct ExperimentConfig {
    double tau = 0.6;          ///< interval length, s
    double tau0 = 0.01;        ///< detection window, s
    double ts = 1e-6;          ///< window sample period, s
    double ts_relax = 1e-4;    ///< step used between windows, s
    std::size_t K = 40;        ///< number of intervals
    std::uint64_t seed = 1;
    double noise_sigma = 0.0;        ///< additive white noise on recorded outputs
    double disturbance_sigma = 0.0;  ///< white aux-voltage disturbance, per step
    double probe_magnitude = 0.0;    ///< R applied during windows (0 = probe off)
    ProbeChannel channel = ProbeChannel::Delta;
    EstimatorOptions estimator;

    /// Throws ValidationError: tau0 <= tau/10, K >= 1, and tau0/ts, tau/ts and
    /// (tau - tau0)/ts_relax must be whole numbers.
    void validate() const;
    Eigen::Index window_samples() const;
    Eigen::Index relax_steps() const;
};

struct SwitchingSequence {
    std::vector<std::size_t> alphas;
};

/// K i.i.d. uniform draws over `scenario_count` scenarios, deterministic per seed.
SwitchingSequence generate_sequence(const ExperimentConfig& config, std::size_t scenario_count);

struct ExperimentResult {
    SwitchingSequence truth;
    std::vector<MeasurementWindow> windows;
    /// State at the start of every interval, plus the final state (K + 1 entries).
    std::vector<Eigen::VectorXd> boundary_states;
    DetectionReport report;
};

/// Simulate the switched system interval by interval with state carried across switches,
/// probing during [k tau, k tau + tau0), then detect every recorded window.
ExperimentResult run_experiment(const ExperimentConfig& config, const ScenarioFamily& family,
                                const SwitchingSequence& sequence);

struct ScenarioSpectrum {
    std::size_t alpha = 0;
    std::string name;
    std::vector<std::complex<double>> eigenvalues;
    double max_real = 0.0;
    bool stable = false;
};

struct EigenReport {
    std::vector<ScenarioSpectrum> spectra;
    bool all_stable = false;
    /// Scenario whose dominant (rightmost) eigenvalue has the most negative real part.
    std::size_t most_damped = 0;
};

EigenReport eigen_report(const ScenarioFamily& family);

} // namespace shslab
