// zoomclick: test-time zoom orchestration around point-predicting GUI
// grounding models. Subcommands: ground (one image+instruction), eval
// (batch over a dataset manifest), bench (behavioral categorization of a
// results log), calibrate (consecutive-distance threshold sweep), synth
// (generate a synthetic dataset manifest).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zoomclick/bench.hpp"
#include "zoomclick/harness.hpp"
#include "zoomclick/image_io.hpp"
#include "zoomclick/run_config.hpp"

namespace {

// Exit codes, one class each so scripts can tell failures apart.
constexpr int kExitOk = 0;
constexpr int kExitError = 1;      // unexpected
constexpr int kExitUsage = 2;      // bad invocation / unreadable input
constexpr int kExitValidation = 3; // config or data invariant violation
constexpr int kExitTransport = 4;  // endpoint unreachable / auth
constexpr int kExitNoTarget = 5;   // pipeline found no target

using namespace zoomclick;

struct ZoomFlags {
    std::optional<int> depth;
    std::vector<double> rho;
    std::optional<int> min_crop;
    std::optional<std::string> prezoom;  // on|off
    std::optional<std::string> grid;     // RxC
    std::optional<double> tau;
    std::optional<std::string> boundary; // shift|clip|shrink
};

struct CommonFlags {
    std::string config_path;
    ZoomFlags zoom;
    std::optional<std::string> grounder;
    std::optional<std::string> endpoint_url;
    std::optional<std::string> model;
    std::optional<std::string> dataset;
    std::optional<std::string> run_dir;
    std::optional<int> parallelism;
    std::optional<uint64_t> seed;
    std::vector<std::string> group_by;
    bool verbose = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f)
{
    cmd->add_option("--config", f.config_path, "JSON config file");
    cmd->add_option("--grounder", f.grounder,
                    "backend: http-bbox|http-toolcall|oracle|mock");
    cmd->add_option("--endpoint", f.endpoint_url, "inference endpoint base URL");
    cmd->add_option("--model", f.model, "model name sent to the endpoint");
    cmd->add_option("--depth", f.zoom.depth, "grounding rounds (T)");
    cmd->add_option("--rho", f.zoom.rho,
                    "shrink ratio; repeat for a per-step schedule");
    cmd->add_option("--min-crop", f.zoom.min_crop, "context floor in pixels (m)");
    cmd->add_option("--tau", f.zoom.tau, "pre-zoom agreement gate in pixels");
    cmd->add_option("--boundary", f.zoom.boundary,
                    "boundary mode: shift|clip|shrink");
    cmd->add_option("--prezoom", f.zoom.prezoom, "pre-zoom consensus: on|off");
    cmd->add_option("--grid", f.zoom.grid, "pre-zoom grid as RxC (e.g. 2x2)");
    cmd->add_option("--dataset", f.dataset, "dataset manifest (JSONL)");
    cmd->add_option("--run-dir", f.run_dir, "run directory for logs and tables");
    cmd->add_option("--parallelism", f.parallelism, "concurrent samples");
    cmd->add_option("--seed", f.seed, "seed for synthetic backends");
    cmd->add_option("--group-by", f.group_by, "tag keys for grouped metrics");
    cmd->add_flag("--verbose", f.verbose, "log endpoint traffic (images elided)");
}

RunConfig merge_config(const CommonFlags& f)
{
    RunConfig cfg;
    if (!f.config_path.empty()) {
        cfg = load_run_config(f.config_path);
    }
    if (f.grounder) cfg.grounder = *f.grounder;
    if (f.endpoint_url) cfg.endpoint.base_url = *f.endpoint_url;
    if (f.model) cfg.endpoint.model = *f.model;
    if (f.zoom.depth) cfg.zoom.depth = *f.zoom.depth;
    if (!f.zoom.rho.empty()) cfg.zoom.schedule = f.zoom.rho;
    if (f.zoom.min_crop) cfg.zoom.min_crop = *f.zoom.min_crop;
    if (f.zoom.tau) cfg.zoom.tau = *f.zoom.tau;
    if (f.zoom.boundary) {
        cfg.zoom.boundary = boundary_mode_from_string(*f.zoom.boundary);
    }
    if (f.zoom.prezoom) {
        if (*f.zoom.prezoom != "on" && *f.zoom.prezoom != "off") {
            throw std::invalid_argument("--prezoom takes on|off");
        }
        cfg.zoom.prezoom = *f.zoom.prezoom == "on";
    }
    if (f.zoom.grid) {
        int rows = 0;
        int cols = 0;
        if (std::sscanf(f.zoom.grid->c_str(), "%dx%d", &rows, &cols) != 2) {
            throw std::invalid_argument("--grid expects RxC, e.g. 2x2");
        }
        cfg.zoom.grid_rows = rows;
        cfg.zoom.grid_cols = cols;
    }
    if (f.dataset) cfg.dataset = *f.dataset;
    if (f.run_dir) cfg.run_dir = *f.run_dir;
    if (f.parallelism) cfg.parallelism = *f.parallelism;
    if (f.seed) cfg.seed = *f.seed;
    if (!f.group_by.empty()) cfg.group_by = f.group_by;
    cfg.validate();
    return cfg;
}

void attach_debug_log(Grounder& grounder, bool verbose)
{
    if (!verbose) return;
    if (auto* http = dynamic_cast<HttpGrounder*>(&grounder)) {
        http->set_debug_log(
            [](const std::string& line) { std::cerr << line << "\n"; });
    }
}

void print_table(const MetricsTable& table)
{
    std::printf("%-28s %8s %10s\n", "group", "n", "accuracy");
    auto row = [](const GroupMetrics& g) {
        std::printf("%-28s %8d %10.4f\n", g.key.c_str(), g.count,
                    g.accuracy());
    };
    row(table.overall);
    for (const auto& g : table.groups) row(g);
    std::printf("depth curve (overall):");
    for (int d = 1; d <= table.max_depth; ++d) {
        std::printf(" d%d=%.4f", d, table.overall.depth_accuracy(d));
    }
    std::printf("\n");
}

int cmd_ground(const CommonFlags& flags, const std::string& image_path,
               const std::string& instruction, const std::string& trace_path)
{
    RunConfig cfg = merge_config(flags);
    if (cfg.grounder == "oracle") {
        throw std::invalid_argument(
            "the oracle backend needs a dataset with ground truth; use eval");
    }
    Image image;
    try {
        image = load_image(image_path);
    } catch (const std::exception& e) {
        std::cerr << "error: cannot read image '" << image_path
                  << "': " << e.what() << "\n";
        return kExitUsage;
    }
    auto [grounder, identity] = make_grounder(cfg, {});
    attach_debug_log(*grounder, flags.verbose);

    const std::string sample_id =
        std::filesystem::path(image_path).stem().string();
    const ZoomResult result =
        zoom_click(image, instruction, *grounder, cfg.zoom, sample_id);

    if (!trace_path.empty()) {
        nlohmann::json record{
            {"id", sample_id},
            {"config_hash", config_hash(cfg.zoom, identity, cfg.seed)},
            {"zoom", result}};
        std::ofstream out(trace_path);
        if (!out) {
            throw std::runtime_error("cannot write trace file: " + trace_path);
        }
        out << record.dump(2) << '\n';
    }

    std::printf("reason: %s\n", to_string(result.reason));
    std::printf("rounds: %zu\n", result.rounds.size());
    if (result.final_click) {
        std::printf("click: (%d, %d)\n", result.final_click->x,
                    result.final_click->y);
        return kExitOk;
    }
    std::printf("click: none\n");
    return kExitNoTarget;
}

int cmd_eval(const CommonFlags& flags)
{
    RunConfig cfg = merge_config(flags);
    if (cfg.dataset.empty()) {
        throw std::invalid_argument("eval needs a dataset (--dataset or config)");
    }
    std::vector<std::string> warnings;
    const auto samples = load_dataset(cfg.dataset, &warnings);
    for (const auto& w : warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    auto [grounder, identity] = make_grounder(cfg, samples);
    attach_debug_log(*grounder, flags.verbose);

    RunOptions opts;
    opts.run_dir = cfg.run_dir;
    opts.parallelism = cfg.parallelism;
    opts.group_by = cfg.group_by;
    opts.provider = [](const GroundingSample& s) {
        return s.image_path.empty()
            ? Image::synthetic(s.image_width, s.image_height)
            : load_image(s.image_path);
    };
    if (auto* http = dynamic_cast<HttpGrounder*>(grounder.get())) {
        opts.metadata["prompt_hash"] = http->prompt_hash();
        opts.metadata["endpoint"] = http->config().base_url;
        opts.metadata["model"] = http->config().model;
    }

    const MetricsTable table =
        run_eval(samples, *grounder, cfg.zoom, identity, cfg.seed, opts);

    // Echo the merged config so the run is reproducible from its artifacts.
    std::ofstream echo(
        (std::filesystem::path(cfg.run_dir) / "effective_config.json").string());
    echo << nlohmann::json(cfg).dump(2) << '\n';

    print_table(table);
    return kExitOk;
}

int cmd_bench(const std::string& results_path, const std::string& out_dir,
              bool lenient)
{
    std::ifstream in(results_path);
    if (!in) {
        throw std::runtime_error("cannot open results log: " + results_path);
    }
    std::vector<SampleResult> results;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;
        results.push_back(j.get<SampleResult>());
    }
    const bool prezoom =
        !results.empty() && results.front().zoom.prezoom.has_value();
    const BenchManifest manifest =
        build_bench(results, out_dir, /*strict=*/!lenient, prezoom);
    write_pairs_csv(consecutive_pairs(results),
                    (std::filesystem::path(out_dir) / "pairs.csv").string());

    std::printf("%zu samples categorized:\n", manifest.entries.size());
    for (const auto& st : manifest.stats) {
        std::printf("  %-14s %6d\n", to_string(st.category), st.count);
    }
    std::printf("artifacts written to %s\n", out_dir.c_str());
    return kExitOk;
}

int cmd_calibrate(const std::string& pairs_path, const std::string& sweep_path)
{
    const auto pairs = read_pairs_csv(pairs_path);
    const CalibrationResult res = calibrate_threshold(pairs);
    std::printf("optimal threshold: %.1f px\n", res.tau);
    std::printf("accuracy: %.3f\n", res.accuracy);
    std::printf("correct-pair mean distance: %.1f px\n", res.correct_mean);
    std::printf("error-pair mean distance: %.1f px\n", res.error_mean);
    if (!sweep_path.empty()) {
        std::ofstream out(sweep_path);
        if (!out) throw std::runtime_error("cannot write " + sweep_path);
        out << "threshold,accuracy\n";
        for (const auto& [tau, acc] : res.sweep) {
            out << tau << ',' << acc << '\n';
        }
    }
    return kExitOk;
}

int cmd_synth(const SyntheticSpec& spec, const std::string& out_path)
{
    const auto samples = make_synthetic_dataset(spec);
    write_manifest(samples, out_path);
    std::printf("wrote %zu samples to %s\n", samples.size(), out_path.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Test-time zoom orchestration for GUI grounding models"};
    app.require_subcommand(1);

    CommonFlags ground_flags;
    std::string image_path;
    std::string instruction;
    std::string trace_path = "trace.json";
    auto* ground = app.add_subcommand("ground", "ground one instruction");
    ground->add_option("--image", image_path, "screenshot file")->required();
    ground->add_option("--instruction", instruction, "what to locate")
        ->required();
    ground->add_option("--trace", trace_path,
                       "trace output file (empty to skip)");
    add_common_flags(ground, ground_flags);

    CommonFlags eval_flags;
    auto* eval = app.add_subcommand("eval", "evaluate a dataset");
    add_common_flags(eval, eval_flags);

    std::string results_path;
    std::string bench_out = "bench";
    bool lenient = false;
    auto* bench = app.add_subcommand("bench", "categorize zoom behavior");
    bench->add_option("--results", results_path, "results.jsonl from eval")
        ->required();
    bench->add_option("--out", bench_out, "output directory");
    bench->add_flag("--lenient", lenient,
                    "pad results from configs with fewer than 4 rounds");

    std::string pairs_path;
    std::string sweep_path;
    auto* calibrate =
        app.add_subcommand("calibrate", "sweep the distance threshold");
    calibrate->add_option("--pairs", pairs_path, "distance,label CSV")
        ->required();
    calibrate->add_option("--sweep-out", sweep_path,
                          "write the threshold->accuracy curve CSV");

    SyntheticSpec spec;
    std::string synth_out = "synthetic.jsonl";
    auto* synth =
        app.add_subcommand("synth", "generate a synthetic dataset manifest");
    synth->add_option("--out", synth_out, "manifest path");
    synth->add_option("--count", spec.count, "number of samples");
    synth->add_option("--width", spec.image_width, "image width");
    synth->add_option("--height", spec.image_height, "image height");
    synth->add_option("--box-width", spec.box_width, "target box width");
    synth->add_option("--box-height", spec.box_height, "target box height");
    synth->add_option("--seed", spec.seed, "placement seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (ground->parsed()) {
            return cmd_ground(ground_flags, image_path, instruction,
                              trace_path);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_flags);
        }
        if (bench->parsed()) {
            return cmd_bench(results_path, bench_out, lenient);
        }
        if (calibrate->parsed()) {
            return cmd_calibrate(pairs_path, sweep_path);
        }
        if (synth->parsed()) {
            return cmd_synth(spec, synth_out);
        }
    } catch (const AuthError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}
