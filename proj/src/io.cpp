#include "shslab/io.hpp"

#include <algorithm>
#include <charconv>
#include <ctime>
#include <filesystem>
#include <map>
#include <sstream>

#include "shslab/errors.hpp"
#include "shslab/util.hpp"

namespace shslab {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace fs = std::filesystem;

namespace {

std::string kind_name(StateKind k) {
    switch (k) {
    case StateKind::Current: return "current";
    case StateKind::Voltage: return "voltage";
    case StateKind::SourceCurrent: return "source_current";
    }
    return "current";
}

StateKind kind_from_name(const std::string& s) {
    if (s == "current") return StateKind::Current;
    if (s == "voltage") return StateKind::Voltage;
    if (s == "source_current") return StateKind::SourceCurrent;
    throw ParseError("unknown state kind '" + s + "'");
}

const json& require(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) {
        throw ParseError(where + ": missing '" + key + "'");
    }
    return j.at(key);
}

json parse_file(const std::string& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": malformed JSON: " + e.what());
    }
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            return out;
        }
        start = pos + 1;
    }
}

double parse_number(std::string_view s, const std::string& where) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(where + ": not a number: '" + std::string(s) + "'");
    }
    return v;
}

std::vector<std::vector<std::string_view>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string_view>> rows;
    std::string_view rest(text);
    while (!rest.empty()) {
        const auto nl = rest.find('\n');
        auto line = rest.substr(0, nl);
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (!line.empty()) {
            rows.push_back(split(line, ','));
        }
    }
    return rows;
}

} // namespace

json matrix_to_json(const MatrixXd& m) {
    json data = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            data.push_back(m(i, j));
        }
    }
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

MatrixXd matrix_from_json(const json& j, const std::string& where) {
    const auto rows = require(j, "rows", where).get<Index>();
    const auto cols = require(j, "cols", where).get<Index>();
    const auto& data = require(j, "data", where);
    if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Index>(data.size()) != rows * cols) {
        throw ParseError(where + ": data length does not match rows x cols");
    }
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index k = 0; k < cols; ++k) {
            m(i, k) = data[static_cast<std::size_t>(i * cols + k)].get<double>();
        }
    }
    return m;
}

const ScenarioFamily& FamilyBundle::monitored() const {
    for (const auto& f : families) {
        if (f.segment_id == monitored_segment) {
            return f;
        }
    }
    throw ValidationError("bundle has no family for monitored segment " + std::to_string(monitored_segment));
}

json family_to_json(const ScenarioFamily& family) {
    family.check_uniform();
    const auto& ref = family[0];
    json kinds = json::array();
    for (auto k : ref.state_kinds) {
        kinds.push_back(kind_name(k));
    }
    json scenarios = json::array();
    for (const auto& s : family.scenarios) {
        scenarios.push_back({{"alpha", s.alpha},
                             {"name", s.name},
                             {"A", matrix_to_json(s.A)},
                             {"B1", matrix_to_json(s.B1)},
                             {"B2", matrix_to_json(s.B2)},
                             {"C", matrix_to_json(s.C)},
                             {"D2", matrix_to_json(s.D2)},
                             {"operating_point", std::vector<double>(s.operating_point.data(),
                                                                     s.operating_point.data() + s.operating_point.size())}});
    }
    return json{{"segment", family.segment_id},
                {"n", ref.n()},
                {"p", ref.p()},
                {"state_labels", ref.state_labels},
                {"state_kinds", std::move(kinds)},
                {"output_labels", ref.output_labels},
                {"alpha_names", family.alpha_names()},
                {"scenarios", std::move(scenarios)}};
}

ScenarioFamily family_from_json(const json& j) {
    const std::string where = "family";
    ScenarioFamily f;
    f.segment_id = require(j, "segment", where).get<SegmentId>();
    const auto labels = require(j, "state_labels", where).get<std::vector<std::string>>();
    const auto outputs = require(j, "output_labels", where).get<std::vector<std::string>>();
    std::vector<StateKind> kinds;
    for (const auto& k : require(j, "state_kinds", where)) {
        kinds.push_back(kind_from_name(k.get<std::string>()));
    }
    std::size_t i = 0;
    for (const auto& s : require(j, "scenarios", where)) {
        const std::string w = where + ".scenarios[" + std::to_string(i++) + "]";
        StateSpaceModel m;
        m.alpha = require(s, "alpha", w).get<int>();
        m.name = require(s, "name", w).get<std::string>();
        m.A = matrix_from_json(require(s, "A", w), w + ".A");
        m.B1 = matrix_from_json(require(s, "B1", w), w + ".B1");
        m.B2 = matrix_from_json(require(s, "B2", w), w + ".B2");
        m.C = matrix_from_json(require(s, "C", w), w + ".C");
        m.D2 = matrix_from_json(require(s, "D2", w), w + ".D2");
        if (s.contains("operating_point")) {
            const auto op = s.at("operating_point").get<std::vector<double>>();
            m.operating_point = Eigen::Map<const VectorXd>(op.data(), static_cast<Index>(op.size()));
        }
        m.state_labels = labels;
        m.state_kinds = kinds;
        m.output_labels = outputs;
        const auto n = m.A.rows();
        if (m.A.cols() != n || m.B1.rows() != n || m.B2.rows() != n || m.C.cols() != n ||
            m.D2.rows() != m.C.rows() || m.D2.cols() != m.B2.cols() ||
            static_cast<Index>(labels.size()) != n || static_cast<Index>(outputs.size()) != m.C.rows()) {
            throw ParseError(w + ": inconsistent matrix dimensions");
        }
        f.scenarios.push_back(std::move(m));
    }
    if (f.scenarios.empty()) {
        throw ParseError(where + ": no scenarios");
    }
    f.check_uniform();
    return f;
}

json bundle_to_json(const FamilyBundle& bundle) {
    json families = json::array();
    for (const auto& f : bundle.families) {
        families.push_back(family_to_json(f));
    }
    return json{{"monitored_segment", bundle.monitored_segment}, {"families", std::move(families)}};
}

FamilyBundle bundle_from_json(const json& j) {
    FamilyBundle b;
    b.monitored_segment = require(j, "monitored_segment", "bundle").get<SegmentId>();
    for (const auto& f : require(j, "families", "bundle")) {
        b.families.push_back(family_from_json(f));
    }
    b.monitored();
    return b;
}

FamilyBundle load_bundle(const std::string& path) { return bundle_from_json(parse_file(path)); }

std::string to_string(GapMode mode) { return mode == GapMode::Aggregate ? "aggregate" : "per_component"; }

GapMode gap_mode_from_string(const std::string& text) {
    if (text == "aggregate") return GapMode::Aggregate;
    if (text == "per_component") return GapMode::PerComponent;
    throw ParseError("unknown gap mode '" + text + "' (expected aggregate or per_component)");
}

ProbeRecord ProbeRecord::from_design(const ProbingDesign& design, double ts, GapMode mode) {
    ProbeRecord r;
    r.mu0 = design.mu0();
    r.mu1 = design.mu1();
    r.delta_min = design.delta_min();
    r.R0 = design.R0();
    r.R = design.R();
    r.margin = design.margin();
    r.channel = design.channel();
    r.tau0 = design.tau0();
    r.ts = ts;
    r.argmin = design.argmin_pair();
    r.mode = mode;
    return r;
}

json probe_to_json(const ProbeRecord& p) {
    return json{{"mu0", p.mu0},         {"mu1", p.mu1},     {"delta_min", p.delta_min},
                {"R0", p.R0},           {"R", p.R},         {"margin", p.margin},
                {"channel", to_string(p.channel)},          {"tau0", p.tau0},
                {"ts", p.ts},           {"mode", to_string(p.mode)},
                {"argmin", {p.argmin.first, p.argmin.second}}};
}

ProbeRecord probe_from_json(const json& j) {
    const std::string w = "probe";
    ProbeRecord p;
    p.mu0 = require(j, "mu0", w).get<double>();
    p.mu1 = require(j, "mu1", w).get<double>();
    p.delta_min = require(j, "delta_min", w).get<double>();
    p.R0 = require(j, "R0", w).get<double>();
    p.R = require(j, "R", w).get<double>();
    p.margin = j.value("margin", 0.0);
    p.channel = probe_channel_from_string(require(j, "channel", w).get<std::string>());
    p.tau0 = require(j, "tau0", w).get<double>();
    p.ts = require(j, "ts", w).get<double>();
    p.mode = gap_mode_from_string(j.value("mode", std::string("aggregate")));
    if (j.contains("argmin")) {
        p.argmin = {j.at("argmin").at(0).get<std::size_t>(), j.at("argmin").at(1).get<std::size_t>()};
    }
    if (!(p.R >= 0.0 && p.tau0 > 0.0 && p.ts > 0.0)) {
        throw ValidationError("probe: R must be >= 0 and tau0, ts positive");
    }
    return p;
}

ProbeRecord load_probe(const std::string& path) { return probe_from_json(parse_file(path)); }

std::string eigen_csv(const EigenReport& report) {
    std::string out = "alpha,name,re,im\n";
    for (const auto& s : report.spectra) {
        for (const auto& z : s.eigenvalues) {
            out += std::to_string(s.alpha) + "," + s.name + "," + format_double(z.real()) + "," +
                   format_double(z.imag()) + "\n";
        }
    }
    return out;
}

std::string window_csv(const MeasurementWindow& w, std::size_t index, const std::vector<std::string>& output_labels,
                       std::size_t n_aux_inputs) {
    std::string out = "window,k,t";
    for (const auto& l : output_labels) {
        out += ",y_" + l;
    }
    out += ",u1_d,u1_delta,u1_ma";
    for (std::size_t i = 0; i < n_aux_inputs; ++i) {
        out += ",u2_" + std::to_string(i);
    }
    out += '\n';
    const std::string prefix = std::to_string(index) + ",";
    for (Index k = 0; k < w.size(); ++k) {
        out += prefix;
        out += std::to_string(k);
        out += ',';
        out += format_double(w.t_start + static_cast<double>(k) * w.ts);
        for (Index i = 0; i < w.outputs.rows(); ++i) {
            out += ',';
            out += format_double(w.outputs(i, k));
        }
        for (Index i = 0; i < 3; ++i) {
            out += ',';
            out += format_double(w.u1(i, k));
        }
        for (Index i = 0; i < w.u2.rows(); ++i) {
            out += ',';
            out += format_double(w.u2(i, k));
        }
        out += '\n';
    }
    return out;
}

std::vector<MeasurementWindow> windows_from_csv(const std::string& text, Index p, Index n_u2,
                                                const std::string& where) {
    const auto rows = csv_rows(text);
    if (rows.empty()) {
        throw ParseError(where + ": empty trace");
    }
    const std::size_t expected = 3 + static_cast<std::size_t>(p) + 3 + static_cast<std::size_t>(n_u2);
    if (rows[0].size() != expected || rows[0][0] != "window") {
        throw ValidationError(where + ": trace has " + std::to_string(rows[0].size()) + " columns, the family needs " +
                              std::to_string(expected));
    }
    std::vector<long> order;
    std::map<long, std::vector<std::size_t>> grouped;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != expected) {
            throw ParseError(where + ":" + std::to_string(r + 1) + ": wrong column count");
        }
        const auto id = static_cast<long>(parse_number(rows[r][0], where));
        if (!grouped.contains(id)) {
            order.push_back(id);
        }
        grouped[id].push_back(r);
    }
    std::vector<MeasurementWindow> out;
    for (const auto id : order) {
        const auto& idx = grouped[id];
        const auto N = static_cast<Index>(idx.size());
        MeasurementWindow w;
        w.outputs.resize(p, N);
        w.u1.resize(3, N);
        w.u2.resize(n_u2, N);
        std::vector<double> times(static_cast<std::size_t>(N));
        for (Index k = 0; k < N; ++k) {
            const auto& row = rows[idx[static_cast<std::size_t>(k)]];
            const std::string loc = where + ":" + std::to_string(idx[static_cast<std::size_t>(k)] + 1);
            if (static_cast<Index>(parse_number(row[1], loc)) != k) {
                throw ParseError(loc + ": sample index out of sequence");
            }
            times[static_cast<std::size_t>(k)] = parse_number(row[2], loc);
            std::size_t c = 3;
            for (Index i = 0; i < p; ++i) w.outputs(i, k) = parse_number(row[c++], loc);
            for (Index i = 0; i < 3; ++i) w.u1(i, k) = parse_number(row[c++], loc);
            for (Index i = 0; i < n_u2; ++i) w.u2(i, k) = parse_number(row[c++], loc);
        }
        w.t_start = times.front();
        if (N < 2) {
            throw ValidationError(where + ": window " + std::to_string(id) + " needs at least two samples");
        }
        w.ts = (times.back() - times.front()) / static_cast<double>(N - 1);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<MeasurementWindow> load_windows(const std::string& path, Index p, Index n_u2) {
    if (!fs::is_directory(path)) {
        return windows_from_csv(read_text_file(path), p, n_u2, path);
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw ValidationError(path + ": no .csv windows found");
    }
    std::vector<MeasurementWindow> out;
    for (const auto& f : files) {
        auto ws = windows_from_csv(read_text_file(f.string()), p, n_u2, f.string());
        std::move(ws.begin(), ws.end(), std::back_inserter(out));
    }
    return out;
}

std::string sequence_column_csv(const std::vector<std::size_t>& alphas, const ScenarioFamily& family) {
    std::string out = "k,alpha,name\n";
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        out += std::to_string(k) + "," + std::to_string(alphas[k]) + "," + family[alphas[k]].name + "\n";
    }
    return out;
}

std::vector<std::size_t> load_sequence_csv(const std::string& path) {
    const auto text = read_text_file(path);
    const auto rows = csv_rows(text);
    if (rows.empty() || rows[0].size() < 2 || rows[0][1] != "alpha") {
        throw ParseError(path + ": expected a k,alpha[,name] header");
    }
    std::vector<std::size_t> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string loc = path + ":" + std::to_string(r + 1);
        if (rows[r].size() < 2 || static_cast<std::size_t>(parse_number(rows[r][0], loc)) != r - 1) {
            throw ParseError(loc + ": malformed row");
        }
        const double a = parse_number(rows[r][1], loc);
        if (a < 0) {
            throw ParseError(loc + ": negative scenario index");
        }
        out.push_back(static_cast<std::size_t>(a));
    }
    return out;
}

std::string comparison_csv(const DetectionReport& report) {
    std::string out = "k,true,detected\n";
    for (const auto& w : report.windows) {
        out += std::to_string(w.k) + "," + (w.truth ? std::to_string(*w.truth) : std::string()) + "," +
               std::to_string(w.verdict.detected) + "\n";
    }
    return out;
}

json report_to_json(const DetectionReport& report, const ScenarioFamily& family) {
    json windows = json::array();
    for (const auto& w : report.windows) {
        json entry{{"k", w.k},
                   {"t_start", w.t_start},
                   {"detected", w.verdict.detected},
                   {"detected_name", family[w.verdict.detected].name},
                   {"residuals", w.verdict.residuals}};
        if (w.truth) {
            entry["true"] = *w.truth;
            entry["match"] = *w.truth == w.verdict.detected;
        }
        windows.push_back(std::move(entry));
    }
    json j{{"segment", family.segment_id},
           {"alpha_names", family.alpha_names()},
           {"windows", std::move(windows)},
           {"has_truth", report.has_truth}};
    if (report.has_truth) {
        j["matches"] = report.matches;
        j["accuracy"] = report.accuracy();
    }
    return j;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const char* tool_version() { return "0.1.0"; }

RunManifest::RunManifest(std::string command) : command_(std::move(command)), started_(utc_timestamp()) {}

void RunManifest::add_input(const std::string& path) {
    inputs_.push_back({{"path", path}, {"sha256", sha256_hex(read_text_file(path))}});
}

void RunManifest::add_output(const std::string& path) {
    outputs_.push_back({{"path", path}, {"sha256", sha256_hex(read_text_file(path))}});
}

json RunManifest::to_json() const {
    json j{{"tool", "shs_lab"},
           {"version", tool_version()},
           {"command", command_},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"config", config_},
           {"started_utc", started_},
           {"finished_utc", utc_timestamp()}};
    for (const auto& [k, v] : extra_.items()) {
        j[k] = v;
    }
    return j;
}

void RunManifest::write(const std::string& path) const { write_text_file(path, to_json().dump(2) + "\n"); }

} // namespace shslab
