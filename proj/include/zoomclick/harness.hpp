#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "zoomclick/dataset.hpp"
#include "zoomclick/pipeline.hpp"
#include "zoomclick/serialize.hpp"

namespace zoomclick {

/// Pluggable correctness rule. Default is the half-open point-in-box test;
/// swap it for benchmarks that score clicks differently.
using HitPredicate =
    std::function<bool(const PixelPoint&, const PixelBox&)>;

inline HitPredicate default_hit_predicate()
{
    return [](const PixelPoint& p, const PixelBox& b) {
        return point_in_box(p, b);
    };
}

/// Supplies the pixels (or just the dimensions) for a sample. The default
/// provider handles synthetic samples and refuses real image paths, keeping
/// the harness free of codec dependencies; callers that evaluate real
/// screenshots inject a decoding provider.
using ImageProvider = std::function<Image(const GroundingSample&)>;

inline ImageProvider synthetic_image_provider()
{
    return [](const GroundingSample& s) {
        if (!s.image_path.empty()) {
            throw std::runtime_error(
                "sample '" + s.id +
                "' references an image file but no decoding provider is set");
        }
        return Image::synthetic(s.image_width, s.image_height);
    };
}

/// Identity of a run for resume purposes: everything that can change a
/// result. Results from different hashes never mix in one run directory.
inline std::string config_hash(const ZoomConfig& config,
                               const std::string& grounder_identity,
                               uint64_t seed)
{
    nlohmann::json j{{"zoom", config},
                     {"grounder", grounder_identity},
                     {"seed", seed}};
    return json_digest(j);
}

/// Per-sample evaluation record: the full zoom trace plus the per-depth
/// correctness sequence derived from it.
struct SampleResult {
    std::string id;
    std::string config_hash;
    int config_depth = 0; // configured T (not the executed rounds)
    std::map<std::string, std::string> tags;
    ZoomResult zoom;
    std::vector<bool> per_depth; // s_t for each executed round
    bool final_correct = false;
    std::string error_note;
};

inline void to_json(nlohmann::json& j, const SampleResult& r)
{
    j = nlohmann::json{
        {"id", r.id},
        {"config_hash", r.config_hash},
        {"depth_cfg", r.config_depth},
        {"tags", r.tags},
        {"s", r.per_depth},
        {"final_correct", r.final_correct},
        {"zoom", r.zoom},
    };
    if (!r.error_note.empty()) j["error"] = r.error_note;
}

inline void from_json(const nlohmann::json& j, SampleResult& r)
{
    r.id = j.at("id").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config_depth = j.at("depth_cfg").get<int>();
    r.tags = j.at("tags").get<std::map<std::string, std::string>>();
    r.per_depth = j.at("s").get<std::vector<bool>>();
    r.final_correct = j.at("final_correct").get<bool>();
    r.zoom = j.at("zoom").get<ZoomResult>();
    r.error_note = j.value("error", std::string{});
}

/// Run the zoom pipeline on one sample and score every depth of the single
/// trajectory against the ground-truth box.
inline SampleResult evaluate_sample(
    const GroundingSample& sample, Grounder& grounder,
    const ZoomConfig& config, const std::string& cfg_hash = "",
    const ImageProvider& provider = synthetic_image_provider(),
    const HitPredicate& hit = default_hit_predicate())
{
    const Image image = provider(sample);
    if (image.width() != sample.image_width ||
        image.height() != sample.image_height) {
        throw std::runtime_error("sample '" + sample.id +
                                 "': manifest dimensions disagree with image");
    }

    SampleResult res;
    res.id = sample.id;
    res.config_hash = cfg_hash;
    res.config_depth = config.depth;
    res.tags = sample.tags;
    res.zoom =
        zoom_click(image, sample.instruction, grounder, config, sample.id);
    res.per_depth.reserve(res.zoom.clicks.size());
    for (const auto& click : res.zoom.clicks) {
        res.per_depth.push_back(click && hit(*click, sample.gt_box));
    }
    res.final_correct = !res.per_depth.empty() && res.per_depth.back();
    if (!res.zoom.final_click) {
        res.error_note = "no valid prediction at round 1";
    }
    return res;
}

/// Per-group accuracy plus the accuracy-at-each-depth curve. Counts are kept
/// as integers so aggregation order can never perturb the numbers.
struct GroupMetrics {
    std::string key;
    int count = 0;
    int correct = 0;
    std::vector<int> depth_correct;

    double accuracy() const
    {
        return count == 0 ? 0.0 : static_cast<double>(correct) / count;
    }

    double depth_accuracy(int depth_1based) const
    {
        if (count == 0 || depth_1based < 1 ||
            depth_1based > static_cast<int>(depth_correct.size())) {
            return 0.0;
        }
        return static_cast<double>(depth_correct[depth_1based - 1]) / count;
    }
};

struct MetricsTable {
    std::vector<std::string> group_by;
    int max_depth = 0;
    GroupMetrics overall;
    std::vector<GroupMetrics> groups; // sorted by key; empty groups omitted
};

namespace detail {

// Correctness at depth d, padding early-terminated runs with their final
// value: a sample that stopped keeps its click at deeper depths.
inline bool correct_at_depth(const SampleResult& r, int depth_1based)
{
    if (r.per_depth.empty()) return false;
    const size_t i = std::min(static_cast<size_t>(depth_1based),
                              r.per_depth.size());
    return r.per_depth[i - 1];
}

} // namespace detail

/// Aggregate results into overall and per-group accuracy tables.
/// `group_by` names tag keys (e.g. {"domain", "kind"}); an unknown key is an
/// error that lists what is available. `curve_depth` forces the curve
/// length; by default it spans the longest executed trace.
inline MetricsTable aggregate(const std::vector<SampleResult>& results,
                              const std::vector<std::string>& group_by = {},
                              int curve_depth = 0)
{
    if (results.empty()) {
        throw std::invalid_argument("aggregate: no results");
    }
    std::set<std::string> available;
    int max_depth = curve_depth;
    for (const auto& r : results) {
        for (const auto& [k, v] : r.tags) available.insert(k);
        max_depth = std::max(max_depth, static_cast<int>(r.per_depth.size()));
    }
    for (const auto& key : group_by) {
        if (!available.count(key)) {
            std::ostringstream oss;
            oss << "aggregate: unknown tag key '" << key << "'; available:";
            for (const auto& k : available) oss << " " << k;
            throw std::invalid_argument(oss.str());
        }
    }

    auto add = [&](GroupMetrics& g, const SampleResult& r) {
        g.depth_correct.resize(static_cast<size_t>(max_depth), 0);
        g.count += 1;
        g.correct += r.final_correct ? 1 : 0;
        for (int d = 1; d <= max_depth; ++d) {
            g.depth_correct[static_cast<size_t>(d) - 1] +=
                detail::correct_at_depth(r, d) ? 1 : 0;
        }
    };

    MetricsTable table;
    table.group_by = group_by;
    table.max_depth = max_depth;
    table.overall.key = "overall";
    std::map<std::string, GroupMetrics> groups;
    for (const auto& r : results) {
        add(table.overall, r);
        if (!group_by.empty()) {
            std::string key;
            for (const auto& k : group_by) {
                if (!key.empty()) key += '/';
                const auto it = r.tags.find(k);
                key += (it == r.tags.end() || it->second.empty()) ? "-"
                                                                  : it->second;
            }
            GroupMetrics& g = groups[key];
            g.key = key;
            add(g, r);
        }
    }
    for (auto& [key, g] : groups) {
        table.groups.push_back(std::move(g));
    }
    return table;
}

namespace detail {

inline std::string format_fraction(double v)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

inline std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace detail

inline void write_metrics_csv(const MetricsTable& table,
                              const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "group,n,accuracy\n";
    auto row = [&](const GroupMetrics& g) {
        out << detail::csv_escape(g.key) << ',' << g.count << ','
            << detail::format_fraction(g.accuracy()) << '\n';
    };
    row(table.overall);
    for (const auto& g : table.groups) row(g);
}

inline void write_depth_curves_csv(const MetricsTable& table,
                                   const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "depth,group,accuracy\n";
    for (int d = 1; d <= table.max_depth; ++d) {
        out << d << ',' << detail::csv_escape(table.overall.key) << ','
            << detail::format_fraction(table.overall.depth_accuracy(d))
            << '\n';
        for (const auto& g : table.groups) {
            out << d << ',' << detail::csv_escape(g.key) << ','
                << detail::format_fraction(g.depth_accuracy(d)) << '\n';
        }
    }
}

inline void to_json(nlohmann::json& j, const GroupMetrics& g)
{
    nlohmann::json curve = nlohmann::json::array();
    for (size_t d = 1; d <= g.depth_correct.size(); ++d) {
        curve.push_back(g.depth_accuracy(static_cast<int>(d)));
    }
    j = nlohmann::json{{"group", g.key},
                       {"n", g.count},
                       {"correct", g.correct},
                       {"accuracy", g.accuracy()},
                       {"depth_accuracy", curve}};
}

inline void write_report_json(const MetricsTable& table,
                              const std::string& path)
{
    nlohmann::json j{{"group_by", table.group_by},
                     {"max_depth", table.max_depth},
                     {"overall", table.overall},
                     {"groups", table.groups}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

/// Options for a resumable batch run.
struct RunOptions {
    std::string run_dir;
    int parallelism = 1;
    std::vector<std::string> group_by;
    ImageProvider provider = synthetic_image_provider();
    HitPredicate hit = default_hit_predicate();
    std::map<std::string, std::string> metadata; // echoed into run.json
    std::function<void(const SampleResult&)> on_result; // test hook
};

namespace detail {

// Results already logged for this config; tolerates a truncated final line
// from a killed run (that sample is simply re-evaluated).
inline std::vector<SampleResult> read_results_log(const std::string& path,
                                                  const std::string& cfg_hash)
{
    std::vector<SampleResult> done;
    std::ifstream in(path);
    if (!in) return done;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j =
            nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) continue;
        try {
            SampleResult r = j.get<SampleResult>();
            if (r.config_hash == cfg_hash) done.push_back(std::move(r));
        } catch (const std::exception&) {
            continue;
        }
    }
    return done;
}

// A killed writer can leave the log without a trailing newline; repair it
// before appending or the next record would merge into the partial line.
inline void ensure_trailing_newline(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) return;
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    if (size <= 0) return;
    in.seekg(-1, std::ios::end);
    char last = 0;
    in.get(last);
    in.close();
    if (last != '\n') {
        std::ofstream out(path, std::ios::app | std::ios::binary);
        out << '\n';
    }
}

} // namespace detail

/// Evaluate a dataset with resume-exact persistence. Completed samples are
/// appended to <run_dir>/results.jsonl as they finish; restarting skips any
/// (sample, config) already on disk, so an interrupted run continues where
/// it stopped and ends with byte-identical metrics files.
inline MetricsTable run_eval(const std::vector<GroundingSample>& dataset,
                             Grounder& grounder, const ZoomConfig& config,
                             const std::string& grounder_identity,
                             uint64_t seed, const RunOptions& opts)
{
    config.validate();
    if (opts.run_dir.empty()) {
        throw std::invalid_argument("run_eval: run_dir required");
    }
    if (opts.parallelism < 1) {
        throw std::invalid_argument("run_eval: parallelism must be >= 1");
    }
    namespace fs = std::filesystem;
    fs::create_directories(opts.run_dir);
    const std::string cfg_hash = config_hash(config, grounder_identity, seed);

    // Run manifest: refuse to mix configs in one directory.
    const std::string manifest_path =
        (fs::path(opts.run_dir) / "run.json").string();
    nlohmann::json manifest{{"config_hash", cfg_hash},
                            {"zoom", config},
                            {"grounder", grounder_identity},
                            {"seed", seed},
                            {"image_encoding", "png"},
                            {"metadata", opts.metadata}};
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        nlohmann::json existing = nlohmann::json::parse(in, nullptr, false);
        if (existing.is_discarded() ||
            existing.value("config_hash", std::string{}) != cfg_hash) {
            throw std::runtime_error(
                "run dir " + opts.run_dir +
                " was created with a different config; refusing to mix results");
        }
    } else {
        std::ofstream out(manifest_path);
        out << manifest.dump(2) << '\n';
    }

    const std::string log_path =
        (fs::path(opts.run_dir) / "results.jsonl").string();
    std::vector<SampleResult> results =
        detail::read_results_log(log_path, cfg_hash);
    std::set<std::string> done;
    for (const auto& r : results) done.insert(r.id);
    detail::ensure_trailing_newline(log_path);

    std::vector<const GroundingSample*> todo;
    for (const auto& s : dataset) {
        if (!done.count(s.id)) todo.push_back(&s);
    }

    std::ofstream log(log_path, std::ios::app);
    if (!log) throw std::runtime_error("cannot append to " + log_path);
    std::mutex mu;
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= todo.size()) return;
            try {
                SampleResult r =
                    evaluate_sample(*todo[i], grounder, config, cfg_hash,
                                    opts.provider, opts.hit);
                std::lock_guard<std::mutex> lock(mu);
                log << nlohmann::json(r).dump() << '\n';
                log.flush();
                if (opts.on_result) opts.on_result(r);
                results.push_back(std::move(r));
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first_error) first_error = std::current_exception();
                next.store(todo.size());
                return;
            }
        }
    };

    const int n_workers =
        std::max(1, std::min<int>(opts.parallelism,
                                  static_cast<int>(todo.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(n_workers));
        for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    // Deterministic aggregation order regardless of completion order.
    std::sort(results.begin(), results.end(),
              [](const SampleResult& a, const SampleResult& b) {
                  return a.id < b.id;
              });
    MetricsTable table = aggregate(results, opts.group_by, config.depth);
    write_metrics_csv(table,
                      (fs::path(opts.run_dir) / "metrics.csv").string());
    write_depth_curves_csv(
        table, (fs::path(opts.run_dir) / "depth_curves.csv").string());
    write_report_json(table,
                      (fs::path(opts.run_dir) / "report.json").string());
    return table;
}

} // namespace zoomclick
