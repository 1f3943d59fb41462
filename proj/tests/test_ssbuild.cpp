#include <gtest/gtest.h>

#include "shslab/errors.hpp"
#include "shslab/ssbuild.hpp"
#include "test_support.hpp"

using namespace shslab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const ContingencySpec& bundled_contingency(std::size_t i) { return fixtures::bundled_config().contingencies.at(i); }

NetworkModel bundled_network() { return load_network_file(fixtures::data_path("paper6bus.json")); }

SegmentModel two_bus_segment(double R, double L, double omega) {
    auto net = bundled_network();
    NetworkModel m;
    m.omega_nom = omega;
    m.buses = {net.bus(1), net.bus(4)};
    m.buses[0].id = 1;
    m.buses[1].id = 2;
    m.lines = {{1, 2, R, L}};
    return segment_network(m, {{1, 1}, {2, 1}}).front();
}

} // namespace

TEST(StateSpace, HandDerivedRlStampAtZeroFrequency) {
    const double R = 1.0, L = 0.7e-3;
    const auto seg = two_bus_segment(R, L, 0.0);
    const SegmentDynamics dyn(seg, ContingencySpec::normal());
    const auto& lay = dyn.layout();
    const MatrixXd& A = dyn.linear_A();
    const int iq = lay.line(0), id = iq + 1;
    const int v1 = lay.bus(1), v2 = lay.bus(2);

    // L dI_q = V1_q - V2_q - R I_q, and the same on d
    MatrixXd expected = MatrixXd::Zero(2, A.cols());
    expected(0, iq) = -R / L;
    expected(1, id) = -R / L;
    expected(0, v1) = 1.0 / L;
    expected(1, v1 + 1) = 1.0 / L;
    expected(0, v2) = -1.0 / L;
    expected(1, v2 + 1) = -1.0 / L;
    EXPECT_TRUE((A.middleRows(iq, 2).array() == expected.array()).all()) << A.middleRows(iq, 2);

    // the assembled model carries the same rows
    const auto model = build_state_space(seg, ContingencySpec::normal());
    EXPECT_TRUE((model.A.middleRows(iq, 2).array() == expected.array()).all());
}

TEST(StateSpace, RlStampRotationAtNominalFrequency) {
    const double w = 2 * std::numbers::pi * 60;
    const auto seg = two_bus_segment(1.0, 0.7e-3, w);
    const SegmentDynamics dyn(seg, ContingencySpec::normal());
    const int iq = dyn.layout().line(0);
    EXPECT_EQ(dyn.linear_A()(iq, iq + 1), w);
    EXPECT_EQ(dyn.linear_A()(iq + 1, iq), -w);
}

TEST(StateSpace, BundledDimensions) {
    const auto& fams = fixtures::bundled_families();
    ASSERT_EQ(fams.size(), 3u);
    EXPECT_EQ(fams[0][0].n(), 18);
    EXPECT_EQ(fams[1][0].n(), 20);
    EXPECT_EQ(fams[2][0].n(), 18);
    const auto& m1 = fixtures::monitored_family();
    ASSERT_EQ(m1.size(), 4u);
    for (const auto& s : m1.scenarios) {
        EXPECT_EQ(s.n(), 18);
        EXPECT_EQ(s.state_labels, m1[0].state_labels);
    }
    EXPECT_EQ(m1.alpha_names(),
              (std::vector<std::string>{"normal", "short_circuit_1_4", "outage_1_4", "disconnect_1_4"}));
}

TEST(StateSpace, StateOrderOfFirstSegment) {
    EXPECT_EQ(fixtures::monitored_family()[0].state_labels,
              (std::vector<std::string>{"i_pv", "v_dc", "i_tq", "i_td", "V_Cs", "V_Cb", "I1_4q", "I1_4d", "Ia1_2_fq",
                                        "Ia1_2_fd", "V1q", "V1d", "ILL1q", "ILL1d", "V4q", "V4d", "ILL4q", "ILL4d"}));
}

TEST(StateSpace, JacobianMatchesIndependentNonlinearModel) {
    const auto& fam = fixtures::monitored_family();
    for (std::size_t a = 0; a < fam.size(); ++a) {
        fixtures::SegmentOneOracle oracle;
        oracle.scenario = static_cast<int>(a);
        const Eigen::Vector3d u(0.5, 0.1, 0.8);
        const Eigen::Vector2d u2 = Eigen::Vector2d::Zero();
        const VectorXd& x_op = fam[a].operating_point;

        // the library's operating point is an equilibrium of the hand-written model too
        const VectorXd f0 = oracle(x_op, u, u2);
        const MatrixXd J = fixtures::central_jacobian([&](const VectorXd& x) { return oracle(x, u, u2); }, x_op, 1e-3);
        const VectorXd scale = J.cwiseAbs() * x_op.cwiseAbs();
        for (Eigen::Index i = 0; i < f0.size(); ++i) {
            EXPECT_LE(std::abs(f0(i)), 1e-9 * std::max(1.0, scale(i))) << "alpha " << a << " row " << i;
        }

        EXPECT_LE(fixtures::entrywise_relative_error(fam[a].A, J), 1e-6) << "alpha " << a;

        const MatrixXd Ju = fixtures::central_jacobian(
            [&](const VectorXd& uu) { return oracle(x_op, uu.head<3>(), u2); }, u, 1e-7);
        EXPECT_LE(fixtures::entrywise_relative_error(fam[a].B1, Ju), 1e-6) << "alpha " << a;

        const MatrixXd J2 = fixtures::central_jacobian(
            [&](const VectorXd& vv) { return oracle(x_op, u, vv.head<2>()); }, VectorXd(u2), 1e-3);
        EXPECT_LE(fixtures::entrywise_relative_error(fam[a].B2, J2), 1e-6) << "alpha " << a;
    }
}

TEST(StateSpace, KclStampsMatchIncidence) {
    const auto net = bundled_network();
    const std::vector<std::vector<std::pair<BusId, BusId>>> shapes = {
        {{1, 2}, {2, 3}, {3, 4}},  // chain
        {{2, 1}, {2, 3}, {2, 4}},  // star
        {{4, 1}, {1, 3}, {3, 2}},  // chain, scrambled orientation
    };
    for (std::size_t shape = 0; shape < shapes.size(); ++shape) {
        for (BusId pvb = 1; pvb <= 4; ++pvb) {
            NetworkModel m;
            for (BusId b = 1; b <= 5; ++b) {
                BusSpec s = net.bus(b <= 3 ? b : 1);
                s.id = b;
                s.load->C = 1e-3 * b;  // distinct capacitances
                s.kind = BusKind::Load;
                s.pvb.reset();
                if (b == pvb || b == 5) {
                    s.kind = BusKind::PVB;
                    s.pvb = net.bus(4).pvb;
                }
                m.buses.push_back(s);
            }
            double r = 0.3;
            for (auto [f, t] : shapes[shape]) {
                m.lines.push_back({f, t, r, r * 1e-3});
                r += 0.2;
            }
            m.lines.push_back({4, 5, 0.9, 0.4e-3});  // cut line to a second segment
            const auto seg = segment_network(m, {{1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 2}}).front();
            const SegmentDynamics dyn(seg, ContingencySpec::normal());
            const auto& lay = dyn.layout();
            const MatrixXd& A = dyn.linear_A();

            // independent incidence: current columns (i_t, lines, aux, load branches) x buses
            std::vector<int> cols{StateLayout::kItq};
            for (int l = 0; l < lay.n_lines; ++l) cols.push_back(lay.line(l));
            for (int a = 0; a < lay.n_aux; ++a) cols.push_back(lay.aux(a));
            for (auto b : lay.buses) cols.push_back(lay.bus(b) + 2);
            for (auto b : lay.buses) {
                const double C = 1e-3 * b;
                std::map<int, double> expect;
                if (b == pvb) expect[StateLayout::kItq] += 1.0;
                for (int l = 0; l < lay.n_lines; ++l) {
                    const auto& line = seg.internal_lines[static_cast<std::size_t>(l)];
                    if (line.to == b) expect[lay.line(l)] += 1.0;
                    if (line.from == b) expect[lay.line(l)] -= 1.0;
                }
                for (int a = 0; a < lay.n_aux; ++a) {
                    if (seg.aux_buses[static_cast<std::size_t>(a)].attach_bus == b) expect[lay.aux(a)] -= 1.0;
                }
                expect[lay.bus(b) + 2] -= 1.0;
                const int v = lay.bus(b);
                for (int c : cols) {
                    const double want = expect.contains(c) ? expect[c] / C : 0.0;
                    EXPECT_EQ(A(v, c), want) << "shape " << shape << " pvb " << pvb << " bus " << b << " col " << c;
                    EXPECT_EQ(A(v + 1, c + 1), want);
                    EXPECT_EQ(A(v, c + 1), 0.0);
                    EXPECT_EQ(A(v + 1, c), 0.0);
                }
            }
        }
    }
}

TEST(StateSpace, LineOutageDecouplesTheLineCurrent) {
    const auto& fam = fixtures::monitored_family();
    const auto& A = fam[2].A;
    const StateLayout lay(fixtures::bundled_segments()[0]);
    const int i = lay.line(0);
    const double R = 1.0, L = 0.7e-3;
    for (int c = 0; c < A.cols(); ++c) {
        EXPECT_EQ(A(i, c), c == i ? -R / L : 0.0);
        EXPECT_EQ(A(i + 1, c), c == i + 1 ? -R / L : 0.0);
    }
    for (int r = 0; r < A.rows(); ++r) {
        if (r == i || r == i + 1) continue;
        EXPECT_EQ(A(r, i), 0.0);
        EXPECT_EQ(A(r, i + 1), 0.0);
    }
}

TEST(StateSpace, DisconnectRemovesOpenEnd) {
    const auto& A = fixtures::monitored_family()[3].A;
    const StateLayout lay(fixtures::bundled_segments()[0]);
    const int i = lay.line(0), v1 = lay.bus(1), v4 = lay.bus(4);
    EXPECT_EQ(A.block(i, v1, 2, 2).norm(), 0.0);
    EXPECT_EQ(A.block(v1, i, 2, 2).norm(), 0.0);
    EXPECT_NE(A.block(i, v4, 2, 2).norm(), 0.0);
    EXPECT_NE(A.block(v4, i, 2, 2).norm(), 0.0);
}

TEST(StateSpace, ScenarioLocality) {
    const auto& segs = fixtures::bundled_segments();
    ContingencySpec fault{ContingencyKind::ShortCircuit, "sc_2_5", 2, 5, 1e-3, 0};
    ContingencySpec outage{ContingencyKind::LineOutage, "out_1_4", 1, 4, 1e-3, 0};
    const auto m1_normal = build_state_space(segs[0], ContingencySpec::normal());
    const auto m1_local = build_state_space(segs[0], localize(segs[0], fault));
    EXPECT_TRUE((m1_normal.A.array() == m1_local.A.array()).all());
    EXPECT_TRUE((m1_normal.B1.array() == m1_local.B1.array()).all());
    const auto m2_normal = build_state_space(segs[1], ContingencySpec::normal());
    const auto m2_local = build_state_space(segs[1], localize(segs[1], outage));
    EXPECT_TRUE((m2_normal.A.array() == m2_local.A.array()).all());
    // the contingency does change its own segment
    EXPECT_FALSE((build_state_space(segs[1], fault).A.array() == m2_normal.A.array()).all());
    EXPECT_EQ(localize(segs[1], outage).kind, ContingencyKind::Normal);
    EXPECT_THROW(build_state_space(segs[0], fault), ValidationError);
}

TEST(StateSpace, FamilyConstruction) {
    const auto& seg = fixtures::bundled_segments()[0];
    const auto one = build_family(seg, {ContingencySpec::normal()});
    EXPECT_EQ(one.size(), 1u);
    const auto twin = build_family(seg, {ContingencySpec::normal(), ContingencySpec::normal()});
    EXPECT_TRUE((twin[0].A.array() == twin[1].A.array()).all());
    EXPECT_TRUE((twin[0].B1.array() == twin[1].B1.array()).all());
    EXPECT_THROW(build_family(seg, {bundled_contingency(1)}), ValidationError);
    EXPECT_THROW(build_family(seg, {}), ValidationError);
    try {
        build_family(seg, {ContingencySpec::normal(), {ContingencyKind::LineOutage, "elsewhere", 2, 3, 1e-3, 0}});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("scenario 1 (elsewhere)"), std::string::npos);
    }
}

TEST(StateSpace, FamilyUniformityCheck) {
    auto fam = fixtures::monitored_family();
    EXPECT_NO_THROW(fam.check_uniform());
    fam.scenarios[2].state_labels[0] = "other";
    EXPECT_THROW(fam.check_uniform(), ValidationError);
}

TEST(StateSpace, ContingencyArgumentChecks) {
    const auto& seg = fixtures::bundled_segments()[0];
    EXPECT_THROW(build_state_space(seg, {ContingencyKind::ShortCircuit, "sc", 1, 4, 0.0, 0}), ValidationError);
    EXPECT_THROW(build_state_space(seg, {ContingencyKind::LineDisconnect, "dc", 1, 4, 1e-3, 2}), ValidationError);
}

TEST(Measurement, SelectsMonitoredQuantities) {
    const auto& m = fixtures::monitored_family()[0];
    ASSERT_EQ(m.C.rows(), 7);
    EXPECT_EQ(m.output_labels,
              (std::vector<std::string>{"v_dc", "i_tq", "i_td", "ILL4q", "ILL4d", "Va1_2_fq", "Va1_2_fd"}));
    const std::vector<std::string> picked{"v_dc", "i_tq", "i_td", "ILL4q", "ILL4d"};
    for (int r = 0; r < 5; ++r) {
        Eigen::Index col = 0;
        EXPECT_EQ(m.C.row(r).maxCoeff(&col), 1.0);
        EXPECT_EQ(m.C.row(r).sum(), 1.0);
        EXPECT_EQ(m.state_labels[static_cast<std::size_t>(col)], picked[static_cast<std::size_t>(r)]);
    }
    EXPECT_EQ(m.C.bottomRows(2).norm(), 0.0);
    EXPECT_TRUE(m.D2.topRows(5).isZero(0.0));
    EXPECT_TRUE(m.D2.bottomRows(2).isIdentity(0.0));
}

TEST(Measurement, InducedNormIsOne) {
    for (const auto& fam : fixtures::bundled_families()) {
        for (const auto& s : fam.scenarios) {
            Eigen::JacobiSVD<MatrixXd> svd(s.C);
            EXPECT_DOUBLE_EQ(svd.singularValues()(0), 1.0);
        }
    }
}

TEST(Measurement, NoAuxMeansEmptyDisturbance) {
    const auto seg = two_bus_segment(1.0, 0.7e-3, kDefaultOmega);
    const auto [C, D2] = build_measurement(seg);
    EXPECT_EQ(C.rows(), 5);
    EXPECT_EQ(D2.cols(), 0);
}

TEST(Measurement, MeasuredLoadBusOverride) {
    auto seg = fixtures::bundled_segments()[0];
    seg.measured_load_bus = 1;
    const auto [C, D2] = build_measurement(seg);
    const StateLayout lay(seg);
    EXPECT_EQ(C(3, lay.bus(1) + 2), 1.0);
    EXPECT_EQ(output_labels(seg)[3], "ILL1q");
}
