#include "shslab/probing.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "shslab/errors.hpp"
#include "shslab/util.hpp"

namespace shslab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(ProbeChannel channel) {
    switch (channel) {
    case ProbeChannel::DutyCycle: return "d";
    case ProbeChannel::Delta: return "delta";
    case ProbeChannel::Modulation: return "m_a";
    }
    return "delta";
}

ProbeChannel probe_channel_from_string(const std::string& text) {
    if (text == "d" || text == "0") return ProbeChannel::DutyCycle;
    if (text == "delta" || text == "1") return ProbeChannel::Delta;
    if (text == "m_a" || text == "2") return ProbeChannel::Modulation;
    throw ParseError("unknown probe channel '" + text + "' (expected d, delta or m_a)");
}

double mami_threshold(double mu0, double mu1, double delta_min) { return 2.0 * mu0 * mu1 / delta_min; }

ProbingDesign ProbingDesign::from_bounds(double mu0, double mu1, double delta_min, double margin,
                                         ProbeChannel channel, double tau0,
                                         std::pair<std::size_t, std::size_t> argmin) {
    if (!(mu0 > 0.0)) {
        throw ValidationError("probe design: mu0 must be > 0 (degenerate initial-state bound)");
    }
    if (!(mu1 > 0.0)) {
        throw ValidationError("probe design: mu1 must be > 0");
    }
    if (!(delta_min > 0.0)) {
        throw ValidationError("probe design: delta_min must be > 0 (scenarios indistinguishable)");
    }
    if (!(margin > 1.0)) {
        throw ValidationError("probe design: margin must be > 1 so that R > R0");
    }
    if (!(tau0 > 0.0)) {
        throw ValidationError("probe design: tau0 must be > 0");
    }
    ProbingDesign d;
    d.mu0_ = mu0;
    d.mu1_ = mu1;
    d.delta_min_ = delta_min;
    d.r0_ = mami_threshold(mu0, mu1, delta_min);
    d.r_ = margin * d.r0_;
    d.margin_ = margin;
    d.channel_ = channel;
    d.tau0_ = tau0;
    d.argmin_ = argmin;
    if (!(d.r_ > d.r0_)) {
        throw ValidationError("probe design: R does not exceed R0");
    }
    return d;
}

Eigen::Vector3d ProbingDesign::input() const {
    Eigen::Vector3d u = Eigen::Vector3d::Zero();
    u(static_cast<int>(channel_)) = r_;
    return u;
}

double compute_mu0(const StateSpaceModel& model, const VectorXd& equilibrium) {
    if (equilibrium.size() != model.n()) {
        throw NumericalError("compute_mu0: equilibrium has the wrong dimension");
    }
    if (!equilibrium.allFinite()) {
        throw NumericalError("compute_mu0: equilibrium is not finite");
    }
    bool any = false;
    double peak = 0.0;
    for (int i = 0; i < model.n(); ++i) {
        if (model.state_kinds.at(i) == StateKind::Current) {
            any = true;
            peak = std::max(peak, std::abs(equilibrium(i)));
        }
    }
    if (!any) {
        throw NumericalError("compute_mu0: model has no current-typed states");
    }
    return 0.02 * peak;
}

double compute_mu1(const ScenarioFamily& family) {
    double mu1 = 0.0;
    for (const auto& s : family.scenarios) {
        const double re = max_real_part(eigenvalues(s));
        if (!(re < 0.0)) {
            throw NumericalError("compute_mu1: scenario '" + s.name + "' is not Hurwitz (max Re = " +
                                 format_double(re) + "), the ||C|| bound does not apply");
        }
        if (s.C.size() > 0) {
            Eigen::JacobiSVD<MatrixXd> svd(s.C);
            mu1 = std::max(mu1, svd.singularValues()(0));
        }
    }
    return mu1;
}

ResponseTrace step_response(const StateSpaceModel& model, ProbeChannel channel, double tau0, double ts) {
    const auto steps = static_cast<Eigen::Index>(std::llround(tau0 / ts)) + 1;
    const auto d = discretize_zoh(model, ts);
    MatrixXd u1 = MatrixXd::Zero(3, steps);
    u1.row(static_cast<int>(channel)).setOnes();
    const MatrixXd u2 = MatrixXd::Zero(model.n_u2(), steps);
    return simulate(d, VectorXd::Zero(model.n()), u1, u2, steps);
}

DeltaMinResult compute_delta_min(const ScenarioFamily& family, ProbeChannel channel, double tau0, double ts,
                                 GapMode mode) {
    if (family.size() < 2) {
        throw ValidationError("compute_delta_min: need at least two scenarios");
    }
    std::vector<ResponseTrace> responses(family.size());
    parallel_for(family.size(), [&](std::size_t i) { responses[i] = step_response(family[i], channel, tau0, ts); });

    DeltaMinResult best;
    best.delta_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < family.size(); ++i) {
        for (std::size_t j = i + 1; j < family.size(); ++j) {
            double gap = 0.0;
            if (mode == GapMode::Aggregate) {
                gap = (responses[i].aggregate - responses[j].aggregate).cwiseAbs().maxCoeff();
            } else {
                gap = (responses[i].outputs - responses[j].outputs).cwiseAbs().maxCoeff();
            }
            ++best.pairs_evaluated;
            if (gap < best.delta_min) {
                best.delta_min = gap;
                best.argmin = {i, j};
            }
        }
    }
    return best;
}

ProbingDesign design_mami(const ScenarioFamily& family, const VectorXd& equilibrium, const MamiOptions& options) {
    const double mu0 = compute_mu0(family[0], equilibrium);
    if (!(mu0 > 0.0)) {
        throw NumericalError("design_mami: mu0 is zero, the probe threshold is degenerate");
    }
    const double mu1 = compute_mu1(family);
    const auto dm = compute_delta_min(family, options.channel, options.tau0, options.ts, options.mode);
    if (!dm.distinguishable()) {
        throw NumericalError("design_mami: scenarios " + std::to_string(dm.argmin.first) + " and " +
                             std::to_string(dm.argmin.second) +
                             " are indistinguishable under this probe channel (delta_min = 0)");
    }
    return ProbingDesign::from_bounds(mu0, mu1, dm.delta_min, options.margin, options.channel, options.tau0,
                                      dm.argmin);
}

} // namespace shslab
