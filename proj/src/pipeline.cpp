#include "shslab/pipeline.hpp"

#include <filesystem>

#include "shslab/errors.hpp"
#include "shslab/io.hpp"
#include "shslab/util.hpp"

namespace shslab {

using nlohmann::json;

namespace {

double number_or(const json& obj, const std::string& key, double fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj.at(key).is_number()) {
        throw ParseError("config." + key + ": expected a number");
    }
    return obj.at(key).get<double>();
}

} // namespace

ContingencySpec parse_contingency(const json& obj, const std::string& where) {
    if (!obj.is_object() || !obj.contains("kind") || !obj.at("kind").is_string()) {
        throw ParseError(where + ": contingency needs a string 'kind'");
    }
    ContingencySpec c;
    c.kind = contingency_kind_from_string(obj.at("kind").get<std::string>());
    c.name = obj.value("name", to_string(c.kind));
    if (c.kind == ContingencyKind::Normal) {
        return c;
    }
    if (!obj.contains("line") || !obj.at("line").is_array() || obj.at("line").size() != 2) {
        throw ParseError(where + ": contingency needs 'line': [from, to]");
    }
    c.from = obj.at("line")[0].get<BusId>();
    c.to = obj.at("line")[1].get<BusId>();
    if (c.kind == ContingencyKind::ShortCircuit) {
        if (obj.contains("R_f_ohm")) {
            c.R_f = obj.at("R_f_ohm").get<double>();
        } else if (obj.contains("R_f_mohm")) {
            c.R_f = scale_decimal(obj.at("R_f_mohm").get<double>(), -3);
        }
    }
    if (c.kind == ContingencyKind::LineDisconnect) {
        if (!obj.contains("open_end")) {
            throw ParseError(where + ": LineDisconnect needs 'open_end'");
        }
        c.open_end = obj.at("open_end").get<BusId>();
    }
    return c;
}

json contingency_to_json(const ContingencySpec& c) {
    json j{{"name", c.name}, {"kind", to_string(c.kind)}};
    if (c.kind != ContingencyKind::Normal) {
        j["line"] = {c.from, c.to};
    }
    if (c.kind == ContingencyKind::ShortCircuit) {
        j["R_f_ohm"] = c.R_f;
    }
    if (c.kind == ContingencyKind::LineDisconnect) {
        j["open_end"] = c.open_end;
    }
    return j;
}

PipelineConfig parse_pipeline_config(const json& doc, const std::string& base_dir) {
    if (!doc.is_object()) {
        throw ParseError("config: expected a JSON object");
    }
    PipelineConfig cfg;
    cfg.document = doc;
    if (!doc.contains("network") || !doc.at("network").is_string()) {
        throw ParseError("config: missing string 'network' (path to the network document)");
    }
    std::filesystem::path net = doc.at("network").get<std::string>();
    if (net.is_relative()) {
        net = std::filesystem::path(base_dir) / net;
    }
    cfg.network_path = net.string();
    cfg.network = load_network_file(cfg.network_path);

    cfg.assignment = doc.contains("segments") ? parse_assignment(doc.at("segments"))
                                              : nearest_pvb_assignment(cfg.network);
    if (doc.contains("measured_load_bus")) {
        for (const auto& [key, bus] : doc.at("measured_load_bus").items()) {
            cfg.measured_load_bus[std::stoi(key)] = bus.get<BusId>();
        }
    }
    if (doc.contains("aux_voltage_op")) {
        const auto& v = doc.at("aux_voltage_op");
        cfg.build.aux_voltage_op = {v.at(0).get<double>(), v.at(1).get<double>()};
    }

    if (doc.contains("contingencies")) {
        std::size_t i = 0;
        for (const auto& c : doc.at("contingencies")) {
            cfg.contingencies.push_back(parse_contingency(c, "contingencies[" + std::to_string(i++) + "]"));
        }
    }
    if (cfg.contingencies.empty() || cfg.contingencies.front().kind != ContingencyKind::Normal) {
        cfg.contingencies.insert(cfg.contingencies.begin(), ContingencySpec::normal());
    }
    cfg.monitored_segment = doc.value("monitored_segment", cfg.assignment.begin()->second);

    const json probe = doc.value("probe", json::object());
    cfg.probe.channel = probe_channel_from_string(probe.value("channel", std::string("delta")));
    cfg.probe.tau0 = number_or(probe, "tau0", 0.01);
    cfg.probe.ts = number_or(probe, "ts", 1e-6);
    cfg.probe.margin = number_or(probe, "margin", 1.01);
    cfg.probe.mode = gap_mode_from_string(probe.value("mode", std::string("aggregate")));
    if (probe.contains("magnitude") && !probe.at("magnitude").is_null()) {
        cfg.probe_magnitude = probe.at("magnitude").get<double>();
    }

    const json det = doc.value("detection", json::object());
    cfg.experiment.estimator.subsample = det.value("subsample", Eigen::Index{10});
    cfg.experiment.estimator.rank_tolerance = number_or(det, "rank_tolerance", 1e-10);
    if (det.contains("weights")) {
        const auto w = det.at("weights").get<std::vector<double>>();
        cfg.experiment.estimator.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    }

    const json ex = doc.value("experiment", json::object());
    auto& e = cfg.experiment;
    e.tau = number_or(ex, "tau", 0.6);
    e.tau0 = cfg.probe.tau0;
    e.ts = cfg.probe.ts;
    e.ts_relax = number_or(ex, "ts_relax", 1e-4);
    e.K = ex.value("K", std::size_t{40});
    e.seed = ex.value("seed", std::uint64_t{1});
    e.noise_sigma = number_or(ex, "noise_sigma", 0.0);
    e.disturbance_sigma = number_or(ex, "disturbance_sigma", 0.0);
    e.channel = cfg.probe.channel;
    return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": malformed JSON: " + e.what());
    }
    return parse_pipeline_config(doc, std::filesystem::path(path).parent_path().string());
}

std::vector<SegmentModel> build_segments(const PipelineConfig& config) {
    auto segments = segment_network(config.network, config.assignment);
    for (auto& s : segments) {
        auto it = config.measured_load_bus.find(s.id);
        if (it != config.measured_load_bus.end()) {
            if (!s.params.contains(it->second)) {
                throw ValidationError("measured load bus " + std::to_string(it->second) + " is not in segment " +
                                      std::to_string(s.id));
            }
            s.measured_load_bus = it->second;
        }
    }
    return segments;
}

std::vector<ScenarioFamily> build_families(const PipelineConfig& config, const std::vector<SegmentModel>& segments) {
    std::vector<ScenarioFamily> out;
    for (const auto& s : segments) {
        std::vector<ContingencySpec> list{config.contingencies.front()};
        for (std::size_t i = 1; i < config.contingencies.size(); ++i) {
            const auto& c = config.contingencies[i];
            if (localize(s, c) == c) {
                list.push_back(c);
            }
        }
        out.push_back(build_family(s, list, config.build));
    }
    return out;
}

std::size_t family_index(const std::vector<ScenarioFamily>& families, SegmentId id) {
    for (std::size_t i = 0; i < families.size(); ++i) {
        if (families[i].segment_id == id) {
            return i;
        }
    }
    throw ValidationError("no family for segment " + std::to_string(id));
}

ProbeRecord design_probe(const ScenarioFamily& family, const MamiOptions& options) {
    const auto design = design_mami(family, family[0].operating_point, options);
    return ProbeRecord::from_design(design, options.ts, options.mode);
}

PipelineRun run_pipeline(const PipelineConfig& config) {
    PipelineRun run;
    run.segments = build_segments(config);
    run.bundle.monitored_segment = config.monitored_segment;
    run.bundle.families = build_families(config, run.segments);
    const auto& family = run.bundle.monitored();
    run.probe = design_probe(family, config.probe);
    run.experiment = config.experiment;
    run.experiment.probe_magnitude = config.probe_magnitude.value_or(run.probe.R);
    const auto sequence = generate_sequence(run.experiment, family.size());
    run.result = run_experiment(run.experiment, family, sequence);
    return run;
}

} // namespace shslab
