// shs_lab: command-line front end for segment modeling, probe design and scenario detection.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "shslab/errors.hpp"
#include "shslab/io.hpp"
#include "shslab/lin_analysis.hpp"
#include "shslab/pipeline.hpp"
#include "shslab/util.hpp"

#ifndef SHSLAB_DATA_DIR
#define SHSLAB_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shslab;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

// Reference constants used by repro-paper to report the threshold arithmetic.
constexpr double kReferenceMu0 = 5.63;
constexpr double kReferenceMu1 = 1.0;
constexpr double kReferenceDeltaMin = 112.15;
constexpr double kReferenceR = 0.101;

std::string manifest_path_for(const std::string& out) { return out + ".manifest.json"; }

void write_output(const std::string& path, const std::string& text) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) {
        fs::create_directories(parent);
    }
    write_text_file(path, text);
}

void write_windows(const fs::path& dir, const ExperimentResult& result, const ScenarioFamily& family,
                   RunManifest& manifest) {
    fs::create_directories(dir);
    const auto& ref = family[0];
    for (std::size_t k = 0; k < result.windows.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "window_%04zu.csv", k);
        const auto path = (dir / name).string();
        write_text_file(path, window_csv(result.windows[k], k, ref.output_labels, static_cast<std::size_t>(ref.n_u2())));
        manifest.add_output(path);
    }
}

struct Options {
    std::size_t threads = 0;

    std::string network;
    std::string config;
    std::string family;
    std::string probe;
    std::string trace;
    std::string truth;
    std::string out;
    std::string out_dir;
    std::string dump;

    double tau0 = 0.01;
    double ts = 1e-6;
    std::string channel = "delta";
    double margin = 1.01;
    std::string mode = "aggregate";
    int segment = 0;

    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t K = 0;
    double magnitude = -1.0;
};

PipelineConfig load_config_with_overrides(const Options& o) {
    auto cfg = load_pipeline_config(o.config);
    if (!o.network.empty()) {
        cfg.network_path = o.network;
        cfg.network = load_network_file(o.network);
    }
    if (o.seed_set) {
        cfg.experiment.seed = o.seed;
    }
    if (o.K > 0) {
        cfg.experiment.K = o.K;
    }
    if (o.magnitude >= 0.0) {
        cfg.probe_magnitude = o.magnitude;
    }
    return cfg;
}

int cmd_validate(const Options& o) {
    const auto model = parse_network_unchecked(json::parse(read_text_file(o.network)));
    const auto report = validate(model);
    if (report.empty()) {
        std::cout << o.network << ": ok (" << model.buses.size() << " buses, " << model.lines.size() << " lines)\n";
        return 0;
    }
    for (const auto& v : report) {
        std::cerr << o.network << ": " << v.code << ": " << v.message << "\n";
    }
    return kExitValidation;
}

int cmd_segment(const Options& o) {
    const auto cfg = load_config_with_overrides(o);
    const auto segments = build_segments(cfg);
    json doc = json::array();
    for (const auto& s : segments) {
        const StateLayout layout(s);
        std::cout << "segment " << s.id << ": pvb bus " << s.pvb_bus << ", buses";
        for (auto b : s.buses()) {
            std::cout << " " << b;
        }
        std::cout << ", " << s.aux_buses.size() << " aux, n = " << layout.size() << "\n";
        doc.push_back(segment_to_json(s));
    }
    if (!o.dump.empty()) {
        RunManifest manifest("segment");
        manifest.add_input(o.config);
        manifest.add_input(cfg.network_path);
        manifest.set_config(cfg.document);
        write_output(o.dump, doc.dump(2) + "\n");
        manifest.add_output(o.dump);
        manifest.write(manifest_path_for(o.dump));
    }
    return 0;
}

int cmd_build(const Options& o) {
    const auto cfg = load_config_with_overrides(o);
    FamilyBundle bundle;
    bundle.monitored_segment = cfg.monitored_segment;
    bundle.families = build_families(cfg, build_segments(cfg));
    for (const auto& f : bundle.families) {
        std::cout << "segment " << f.segment_id << ": n = " << f[0].n() << ", " << f.size() << " scenario(s)\n";
    }
    RunManifest manifest("build");
    manifest.add_input(o.config);
    manifest.add_input(cfg.network_path);
    manifest.set_config(cfg.document);
    write_output(o.out, bundle_to_json(bundle).dump(1) + "\n");
    manifest.add_output(o.out);
    manifest.write(manifest_path_for(o.out));
    return 0;
}

const ScenarioFamily& pick_family(const FamilyBundle& bundle, int segment) {
    if (segment == 0) {
        return bundle.monitored();
    }
    return bundle.families.at(family_index(bundle.families, segment));
}

int cmd_analyze(const Options& o) {
    const auto bundle = load_bundle(o.family);
    const auto& family = pick_family(bundle, o.segment);
    const auto report = eigen_report(family);
    for (const auto& s : report.spectra) {
        std::cout << "alpha " << s.alpha << " (" << s.name << "): max Re = " << format_double(s.max_real)
                  << (s.stable ? "  stable" : "  UNSTABLE") << "\n";
    }
    std::cout << (report.all_stable ? "all spectra in the open left half-plane\n"
                                    : "instability: some eigenvalues have Re >= 0\n");
    RunManifest manifest("analyze");
    manifest.add_input(o.family);
    manifest.set("all_stable", report.all_stable);
    manifest.set("most_damped", report.most_damped);
    write_output(o.out, eigen_csv(report));
    manifest.add_output(o.out);
    manifest.write(manifest_path_for(o.out));
    return 0;
}

int cmd_design_probe(const Options& o) {
    const auto bundle = load_bundle(o.family);
    const auto& family = pick_family(bundle, o.segment);
    MamiOptions opts;
    opts.channel = probe_channel_from_string(o.channel);
    opts.tau0 = o.tau0;
    opts.ts = o.ts;
    opts.margin = o.margin;
    opts.mode = gap_mode_from_string(o.mode);
    const auto probe = design_probe(family, opts);
    std::cout << "mu0 = " << format_double(probe.mu0) << "\nmu1 = " << format_double(probe.mu1)
              << "\ndelta_min = " << format_double(probe.delta_min) << " (pair " << probe.argmin.first << ", "
              << probe.argmin.second << ")\nR0 = " << format_double(probe.R0) << "\nR = " << format_double(probe.R)
              << "\n";
    RunManifest manifest("design-probe");
    manifest.add_input(o.family);
    manifest.set_config(json{{"tau0", o.tau0}, {"ts", o.ts}, {"channel", o.channel}, {"margin", o.margin},
                             {"mode", o.mode}, {"segment", family.segment_id}});
    write_output(o.out, probe_to_json(probe).dump(2) + "\n");
    manifest.add_output(o.out);
    manifest.write(manifest_path_for(o.out));
    return 0;
}

void write_run_outputs(const fs::path& dir, const PipelineRun& run, RunManifest& manifest) {
    fs::create_directories(dir);
    const auto& family = run.bundle.monitored();
    const auto& res = run.result;
    auto emit = [&](const std::string& name, const std::string& text) {
        const auto path = (dir / name).string();
        write_text_file(path, text);
        manifest.add_output(path);
    };
    std::vector<std::size_t> detected;
    for (const auto& w : res.report.windows) {
        detected.push_back(w.verdict.detected);
    }
    emit("matrices.json", bundle_to_json(run.bundle).dump(1) + "\n");
    emit("probe.json", probe_to_json(run.probe).dump(2) + "\n");
    emit("eigs.csv", eigen_csv(eigen_report(family)));
    emit("truth.csv", sequence_column_csv(res.truth.alphas, family));
    emit("detected.csv", sequence_column_csv(detected, family));
    emit("sequence.csv", comparison_csv(res.report));
    auto report = report_to_json(res.report, family);
    report["probe_magnitude"] = run.experiment.probe_magnitude;
    report["seed"] = run.experiment.seed;
    emit("report.json", report.dump(2) + "\n");
    write_windows(dir / "windows", res, family, manifest);
}

int cmd_run(const Options& o) {
    const auto cfg = load_config_with_overrides(o);
    RunManifest manifest("run");
    manifest.add_input(o.config);
    manifest.add_input(cfg.network_path);
    manifest.set_config(cfg.document);
    const auto run = run_pipeline(cfg);
    manifest.set("seed", run.experiment.seed);
    manifest.set("K", run.experiment.K);
    manifest.set("probe_magnitude", run.experiment.probe_magnitude);
    manifest.set("accuracy", run.result.report.accuracy());
    write_run_outputs(o.out_dir, run, manifest);
    manifest.write((fs::path(o.out_dir) / "manifest.json").string());
    std::cout << "R = " << format_double(run.experiment.probe_magnitude) << ", accuracy = "
              << format_double(run.result.report.accuracy()) << " (" << run.result.report.matches << "/"
              << run.result.report.windows.size() << ")\n";
    return 0;
}

int cmd_detect(const Options& o) {
    const auto bundle = load_bundle(o.family);
    const auto& family = pick_family(bundle, o.segment);
    const auto probe = load_probe(o.probe);
    const auto windows = load_windows(o.trace, family[0].p(), family[0].n_u2());
    const auto samples = windows.front().size();
    for (const auto& w : windows) {
        if (w.size() != samples) {
            throw ValidationError("detect: windows differ in length");
        }
        if (std::abs(w.ts - probe.ts) > 1e-9 * probe.ts) {
            throw ValidationError("detect: trace sample period differs from the probe's ts");
        }
    }
    std::vector<std::size_t> truth;
    if (!o.truth.empty()) {
        truth = load_sequence_csv(o.truth);
    }
    RunManifest manifest("detect");
    manifest.add_input(o.family);
    manifest.add_input(o.probe);
    if (fs::is_directory(o.trace)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(o.trace)) {
            if (e.path().extension() == ".csv") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) manifest.add_input(f.string());
    } else {
        manifest.add_input(o.trace);
    }
    if (!o.truth.empty()) {
        manifest.add_input(o.truth);
    }
    EstimatorOptions est;
    const Detector detector(family, probe.ts, samples, est);
    // windows are rebased to their own sample period so the stored t column cannot drift
    auto rebased = windows;
    for (auto& w : rebased) {
        w.ts = probe.ts;
    }
    const auto report = detector.detect_sequence(rebased, truth);
    write_output(o.out, report_to_json(report, family).dump(2) + "\n");
    manifest.add_output(o.out);
    manifest.write(manifest_path_for(o.out));
    for (const auto& w : report.windows) {
        std::cout << w.k << " " << w.verdict.detected << "\n";
    }
    if (report.has_truth) {
        std::cout << "accuracy = " << format_double(report.accuracy()) << "\n";
    }
    return 0;
}

int cmd_repro(const Options& o) {
    const std::string config_path =
        o.config.empty() ? (fs::path(SHSLAB_DATA_DIR) / "paper_experiment.json").string() : o.config;
    Options adjusted = o;
    adjusted.config = config_path;
    const auto cfg = load_config_with_overrides(adjusted);

    const double r0_ref = mami_threshold(kReferenceMu0, kReferenceMu1, kReferenceDeltaMin);
    std::cout << "reference threshold: R0 = 2*" << kReferenceMu0 << "*" << kReferenceMu1 << "/" << kReferenceDeltaMin
              << " = " << format_double(r0_ref) << "; R = " << kReferenceR
              << (kReferenceR > r0_ref ? " exceeds it\n" : " does not exceed it\n");

    const auto run = run_pipeline(cfg);
    for (const auto& f : run.bundle.families) {
        std::cout << "segment " << f.segment_id << ": state dimension " << f[0].n() << "\n";
    }
    const auto& family = run.bundle.monitored();
    const auto eig = eigen_report(family);
    for (const auto& s : eig.spectra) {
        std::cout << "alpha " << s.alpha << " (" << s.name << "): max Re = " << format_double(s.max_real) << "\n";
    }
    std::cout << (eig.all_stable ? "all scenarios stable\n" : "instability detected\n");
    std::cout << "mu0 = " << format_double(run.probe.mu0) << ", mu1 = " << format_double(run.probe.mu1) << "\n";
    std::cout << "delta_min = " << format_double(run.probe.delta_min) << " (reference " << kReferenceDeltaMin
              << "), pair (" << run.probe.argmin.first << ", " << run.probe.argmin.second << ")\n";
    std::cout << "R0 = " << format_double(run.probe.R0) << ", R = " << format_double(run.experiment.probe_magnitude)
              << "\n";
    std::cout << "accuracy = " << format_double(run.result.report.accuracy()) << " (" << run.result.report.matches
              << "/" << run.result.report.windows.size() << ")\n";

    if (!o.out_dir.empty()) {
        RunManifest manifest("repro-paper");
        manifest.add_input(config_path);
        manifest.add_input(cfg.network_path);
        manifest.set_config(cfg.document);
        manifest.set("reference_R0", r0_ref);
        manifest.set("accuracy", run.result.report.accuracy());
        write_run_outputs(o.out_dir, run, manifest);
        manifest.write((fs::path(o.out_dir) / "manifest.json").string());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Segment-level switched-system modeling, probing and contingency detection"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--threads", o.threads, "Cap on worker threads (also SHS_LAB_THREADS)");

    auto* validate_cmd = app.add_subcommand("validate", "Check a network document");
    validate_cmd->add_option("network", o.network, "Network JSON")->required();

    auto* segment_cmd = app.add_subcommand("segment", "Partition the network into segments");
    segment_cmd->add_option("--config", o.config, "Experiment config JSON")->required();
    segment_cmd->add_option("--network", o.network, "Network JSON (overrides the config)");
    segment_cmd->add_option("--dump", o.dump, "Write the segments as JSON");

    auto* build_cmd = app.add_subcommand("build", "Build scenario families");
    build_cmd->add_option("--config", o.config, "Experiment config JSON")->required();
    build_cmd->add_option("--network", o.network, "Network JSON (overrides the config)");
    build_cmd->add_option("--out", o.out, "Output matrices JSON")->required();

    auto* analyze_cmd = app.add_subcommand("analyze", "Eigenvalue analysis of a family");
    analyze_cmd->add_option("--family", o.family, "Matrices JSON")->required();
    analyze_cmd->add_option("--segment", o.segment, "Segment id (default: monitored)");
    analyze_cmd->add_option("--out", o.out, "Output eigenvalue CSV")->required();

    auto* probe_cmd = app.add_subcommand("design-probe", "Design a magnitude-modulated probe");
    probe_cmd->add_option("--family", o.family, "Matrices JSON")->required();
    probe_cmd->add_option("--segment", o.segment, "Segment id (default: monitored)");
    probe_cmd->add_option("--tau0", o.tau0, "Detection window, s");
    probe_cmd->add_option("--ts", o.ts, "Sample period, s");
    probe_cmd->add_option("--channel", o.channel, "Probe channel: d, delta or m_a");
    probe_cmd->add_option("--margin", o.margin, "R / R0");
    probe_cmd->add_option("--mode", o.mode, "Output gap: aggregate or per_component");
    probe_cmd->add_option("--out", o.out, "Output probe JSON")->required();

    auto* run_cmd = app.add_subcommand("run", "Simulate a switching sequence and detect it");
    run_cmd->add_option("--config", o.config, "Experiment config JSON")->required();
    run_cmd->add_option("--network", o.network, "Network JSON (overrides the config)");
    run_cmd->add_option("--out-dir", o.out_dir, "Output directory")->required();
    run_cmd->add_option("--seed", o.seed, "Override the sequence seed")->each([&](const std::string&) { o.seed_set = true; });
    run_cmd->add_option("--K", o.K, "Override the number of intervals");
    run_cmd->add_option("--probe-magnitude", o.magnitude, "Override R (0 disables the probe)");

    auto* detect_cmd = app.add_subcommand("detect", "Detect scenarios in recorded windows");
    detect_cmd->add_option("--family", o.family, "Matrices JSON")->required();
    detect_cmd->add_option("--segment", o.segment, "Segment id (default: monitored)");
    detect_cmd->add_option("--probe", o.probe, "Probe JSON")->required();
    detect_cmd->add_option("--trace", o.trace, "Window CSV file or directory")->required();
    detect_cmd->add_option("--truth", o.truth, "True sequence CSV (k,alpha)");
    detect_cmd->add_option("--out", o.out, "Output report JSON")->required();

    auto* repro_cmd = app.add_subcommand("repro-paper", "Run the bundled six-bus reproduction");
    repro_cmd->add_option("--config", o.config, "Experiment config (default: bundled)");
    repro_cmd->add_option("--out-dir", o.out_dir, "Also write all stage outputs here");
    repro_cmd->add_option("--seed", o.seed, "Override the sequence seed")->each([&](const std::string&) { o.seed_set = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitUsage;
    }

    if (o.threads > 0) {
        set_max_threads(o.threads);
    }

    try {
        if (*validate_cmd) return cmd_validate(o);
        if (*segment_cmd) return cmd_segment(o);
        if (*build_cmd) return cmd_build(o);
        if (*analyze_cmd) return cmd_analyze(o);
        if (*probe_cmd) return cmd_design_probe(o);
        if (*run_cmd) return cmd_run(o);
        if (*detect_cmd) return cmd_detect(o);
        if (*repro_cmd) return cmd_repro(o);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const ValidationError& e) {
        std::cerr << "validation failure: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ParseError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    std::cerr << app.help();
    return kExitUsage;
}
