#include "shslab/detection.hpp"

#include <cmath>

#include "shslab/errors.hpp"
#include "shslab/util.hpp"

namespace shslab {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

InitialStateEstimator::InitialStateEstimator(DiscreteStateSpace model, Index window_samples, EstimatorOptions options)
    : model_(std::move(model)), samples_(window_samples), options_(std::move(options)) {
    if (samples_ < 1) {
        throw ValidationError("estimator: window needs at least one sample");
    }
    if (options_.subsample < 1) {
        throw ValidationError("estimator: subsample must be >= 1");
    }
    const Index p = model_.p();
    const Index n = model_.n();
    if (options_.weights.size() != 0 && options_.weights.size() != p) {
        throw ValidationError("estimator: weights must have one entry per output");
    }
    const Index rows = (samples_ - 1) / options_.subsample + 1;
    obs_.resize(rows * p, n);

    MatrixXd stride_power = MatrixXd::Identity(n, n);
    for (Index k = 0; k < options_.subsample; ++k) {
        stride_power = model_.Ad * stride_power;
    }
    MatrixXd block = model_.C;  // C Ad^{r s}
    for (Index r = 0; r < rows; ++r) {
        obs_.middleRows(r * p, p) = block;
        block = block * stride_power;
    }
    if (options_.weights.size() == p) {
        for (Index r = 0; r < rows; ++r) {
            obs_.middleRows(r * p, p) = options_.weights.asDiagonal() * obs_.middleRows(r * p, p);
        }
    }
    if (obs_.cwiseAbs().maxCoeff() == 0.0) {
        throw NumericalError("estimator: observability map is identically zero (unobservable model)");
    }
    cod_.setThreshold(options_.rank_tolerance);
    cod_.compute(obs_);
}

VectorXd InitialStateEstimator::stack(const MatrixXd& per_sample) const {
    const Index p = model_.p();
    const Index rows = obs_.rows() / p;
    VectorXd out(rows * p);
    for (Index r = 0; r < rows; ++r) {
        out.segment(r * p, p) = per_sample.col(r * options_.subsample);
        if (options_.weights.size() == p) {
            out.segment(r * p, p).array() *= options_.weights.array();
        }
    }
    return out;
}

InitialStateEstimate InitialStateEstimator::estimate(const MeasurementWindow& window) const {
    if (window.size() != samples_ || window.outputs.rows() != model_.p()) {
        throw ValidationError("estimator: window shape does not match the model");
    }
    if (std::abs(window.ts - model_.ts) > 1e-12 * model_.ts) {
        throw ValidationError("estimator: window sample period differs from the model's");
    }
    // forced response of the recorded probe and aux voltages from a zero state
    const auto forced = simulate(model_, VectorXd::Zero(model_.n()), window.u1, window.u2, samples_);
    const VectorXd rhs = stack(window.outputs - forced.outputs);
    InitialStateEstimate est;
    est.x0 = cod_.solve(rhs);
    est.residual = (rhs - obs_ * est.x0).norm();
    return est;
}

InitialStateEstimate estimate_initial_state(const DiscreteStateSpace& model, const MeasurementWindow& window,
                                            const EstimatorOptions& options) {
    return InitialStateEstimator(model, window.size(), options).estimate(window);
}

std::size_t select_scenario(const std::vector<double>& residuals) {
    if (residuals.empty()) {
        throw ValidationError("select_scenario: no residuals");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < residuals.size(); ++i) {
        if (residuals[i] < residuals[best]) {
            best = i;
        }
    }
    return best;
}

double DetectionReport::accuracy() const {
    if (windows.empty()) {
        return 1.0;
    }
    return static_cast<double>(matches) / static_cast<double>(windows.size());
}

Detector::Detector(const ScenarioFamily& family, double ts, Index window_samples, EstimatorOptions options) {
    family.check_uniform();
    std::vector<std::optional<InitialStateEstimator>> built(family.size());
    parallel_for(family.size(), [&](std::size_t i) {
        built[i].emplace(discretize_zoh(family[i], ts), window_samples, options);
    });
    for (auto& b : built) {
        estimators_.push_back(std::move(*b));
    }
}

ScenarioVerdict Detector::detect(const MeasurementWindow& window) const {
    ScenarioVerdict v;
    v.residuals.resize(estimators_.size());
    v.x0_hat.resize(estimators_.size());
    parallel_for(estimators_.size(), [&](std::size_t i) {
        try {
            auto est = estimators_[i].estimate(window);
            v.residuals[i] = est.residual;
            v.x0_hat[i] = std::move(est.x0);
        } catch (const std::exception& e) {
            throw NumericalError("scenario " + std::to_string(i) + ": " + e.what());
        }
    });
    for (std::size_t i = 0; i < v.residuals.size(); ++i) {
        if (!std::isfinite(v.residuals[i])) {
            throw NumericalError("scenario " + std::to_string(i) + ": non-finite residual");
        }
    }
    v.detected = select_scenario(v.residuals);
    return v;
}

DetectionReport Detector::detect_sequence(const std::vector<MeasurementWindow>& windows,
                                          const std::vector<std::size_t>& truth) const {
    if (!truth.empty() && truth.size() != windows.size()) {
        throw ValidationError("detect_sequence: truth sequence length differs from window count");
    }
    DetectionReport report;
    report.has_truth = !truth.empty();
    report.windows.resize(windows.size());
    parallel_for(windows.size(), [&](std::size_t k) {
        auto& r = report.windows[k];
        r.k = k;
        r.t_start = windows[k].t_start;
        r.verdict = detect(windows[k]);
        if (!truth.empty()) {
            r.truth = truth[k];
        }
    });
    for (const auto& r : report.windows) {
        if (r.truth && *r.truth == r.verdict.detected) {
            ++report.matches;
        }
    }
    return report;
}

MeasurementWindow synthesize_window(const DiscreteStateSpace& model, const VectorXd& x0, const MatrixXd& u1,
                                    const MatrixXd& u2, double t_start) {
    MeasurementWindow w;
    w.t_start = t_start;
    w.ts = model.ts;
    w.u1 = u1;
    w.u2 = u2;
    w.outputs = simulate(model, x0, u1, u2, u1.cols(), false, t_start).outputs;
    return w;
}

} // namespace shslab
