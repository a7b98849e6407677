#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomclick/harness.hpp"

namespace zoomclick {

/// Hit/miss outcome at each of the four fixed zoom rounds.
struct CorrectnessSequence {
    std::array<bool, 4> s{};

    bool operator==(const CorrectnessSequence& other) const
    {
        return s == other.s;
    }
};

/// Difficulty x reliability taxonomy of zoom behavior:
///   easy  = already correct at depth 1, hard = first correct later,
///   normal = stays correct afterwards, mislead = flips back to wrong,
///   hard_est = never correct at any depth.
enum class ZoomBehaviorCategory {
    EasyNormal,
    EasyMislead,
    HardNormal,
    HardMislead,
    HardEst,
};

inline constexpr std::array<ZoomBehaviorCategory, 5> kAllCategories = {
    ZoomBehaviorCategory::EasyNormal,  ZoomBehaviorCategory::EasyMislead,
    ZoomBehaviorCategory::HardNormal,  ZoomBehaviorCategory::HardMislead,
    ZoomBehaviorCategory::HardEst,
};

inline const char* to_string(ZoomBehaviorCategory c)
{
    switch (c) {
        case ZoomBehaviorCategory::EasyNormal: return "easy_normal";
        case ZoomBehaviorCategory::EasyMislead: return "easy_mislead";
        case ZoomBehaviorCategory::HardNormal: return "hard_normal";
        case ZoomBehaviorCategory::HardMislead: return "hard_mislead";
        case ZoomBehaviorCategory::HardEst: return "hard_est";
    }
    return "?";
}

inline ZoomBehaviorCategory category_from_string(const std::string& s)
{
    for (const auto c : kAllCategories) {
        if (s == to_string(c)) return c;
    }
    throw std::invalid_argument("unknown category: " + s);
}

/// Derive the fixed four-round sequence from a result. Runs that terminated
/// early keep their final click at deeper depths, so the final correctness
/// value is repeated. In strict mode a result configured for fewer than four
/// rounds is an error instead of being padded.
inline CorrectnessSequence correctness_sequence(const SampleResult& result,
                                                bool strict = true)
{
    if (result.per_depth.empty()) {
        throw std::invalid_argument("correctness_sequence: empty result");
    }
    if (strict && result.config_depth < 4) {
        throw std::invalid_argument(
            "correctness_sequence: result '" + result.id +
            "' was produced with depth " + std::to_string(result.config_depth) +
            " < 4 (strict mode)");
    }
    CorrectnessSequence seq;
    for (size_t t = 0; t < 4; ++t) {
        const size_t i = std::min(t, result.per_depth.size() - 1);
        seq.s[t] = result.per_depth[i];
    }
    return seq;
}

/// Total five-way classification: every length-4 boolean sequence maps to
/// exactly one category.
inline ZoomBehaviorCategory categorize(const CorrectnessSequence& seq)
{
    int first_correct = -1; // 0-based
    for (int t = 0; t < 4; ++t) {
        if (seq.s[static_cast<size_t>(t)]) {
            first_correct = t;
            break;
        }
    }
    if (first_correct < 0) {
        return ZoomBehaviorCategory::HardEst;
    }
    bool mislead = false;
    for (int t = first_correct + 1; t < 4; ++t) {
        if (!seq.s[static_cast<size_t>(t)]) {
            mislead = true;
            break;
        }
    }
    if (first_correct == 0) {
        return mislead ? ZoomBehaviorCategory::EasyMislead
                       : ZoomBehaviorCategory::EasyNormal;
    }
    return mislead ? ZoomBehaviorCategory::HardMislead
                   : ZoomBehaviorCategory::HardNormal;
}

struct BenchEntry {
    std::string id;
    CorrectnessSequence seq;
    ZoomBehaviorCategory category;
};

/// Per-category sample count and per-depth accuracy (mean of s_t within the
/// category).
struct CategoryStats {
    ZoomBehaviorCategory category;
    int count = 0;
    std::array<int, 4> depth_correct{};

    double depth_accuracy(int depth_1based) const
    {
        return count == 0
                   ? 0.0
                   : static_cast<double>(
                         depth_correct[static_cast<size_t>(depth_1based - 1)]) /
                         count;
    }
};

struct BenchManifest {
    std::string config_hash;
    bool prezoom = false;
    std::vector<BenchEntry> entries;
    std::array<CategoryStats, 5> stats; // one per category, fixed order

    int count(ZoomBehaviorCategory c) const
    {
        for (const auto& s : stats) {
            if (s.category == c) return s.count;
        }
        return 0;
    }
};

/// Categorize a full result set and write the benchmark artifacts:
/// <out_dir>/bench_manifest.jsonl (id, sequence, category) and
/// <out_dir>/category_stats.csv (category, n, d1..d4). All results must
/// come from the same config.
inline BenchManifest build_bench(const std::vector<SampleResult>& results,
                                 const std::string& out_dir,
                                 bool strict = true, bool prezoom = false)
{
    if (results.empty()) {
        throw std::invalid_argument("build_bench: no results");
    }
    for (const auto& r : results) {
        if (r.config_hash != results.front().config_hash) {
            throw std::runtime_error(
                "build_bench: mixed configs in results (" + r.id + ")");
        }
    }

    BenchManifest manifest;
    manifest.config_hash = results.front().config_hash;
    manifest.prezoom = prezoom;
    for (size_t i = 0; i < manifest.stats.size(); ++i) {
        manifest.stats[i].category = kAllCategories[i];
    }
    for (const auto& r : results) {
        BenchEntry e;
        e.id = r.id;
        e.seq = correctness_sequence(r, strict);
        e.category = categorize(e.seq);
        auto& st =
            manifest.stats[static_cast<size_t>(e.category)];
        st.count += 1;
        for (size_t t = 0; t < 4; ++t) {
            st.depth_correct[t] += e.seq.s[t] ? 1 : 0;
        }
        manifest.entries.push_back(std::move(e));
    }

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream out((fs::path(out_dir) / "bench_manifest.jsonl").string());
        if (!out) throw std::runtime_error("cannot write bench manifest");
        for (const auto& e : manifest.entries) {
            nlohmann::json j{{"id", e.id},
                             {"s", e.seq.s},
                             {"category", to_string(e.category)}};
            out << j.dump() << '\n';
        }
    }
    {
        std::ofstream out((fs::path(out_dir) / "category_stats.csv").string());
        if (!out) throw std::runtime_error("cannot write category stats");
        out << "category,n,d1,d2,d3,d4\n";
        for (const auto& st : manifest.stats) {
            out << to_string(st.category) << ',' << st.count;
            for (int d = 1; d <= 4; ++d) {
                out << ',' << detail::format_fraction(st.depth_accuracy(d));
            }
            out << '\n';
        }
    }
    return manifest;
}

/// Displacement between predictions in adjacent zoom rounds, labeled by
/// whether both ends were correct (1-1) or exactly one was (0-1 / 1-0).
struct ConsecutivePair {
    double distance = 0.0;
    bool correct_pair = false;
};

/// Extract labeled consecutive-prediction pairs from results. Only rounds
/// with an actual prediction participate; 0-0 pairs carry no signal for the
/// correct-vs-drift boundary and are dropped.
inline std::vector<ConsecutivePair> consecutive_pairs(
    const std::vector<SampleResult>& results)
{
    std::vector<ConsecutivePair> pairs;
    for (const auto& r : results) {
        const auto& rounds = r.zoom.rounds;
        for (size_t t = 0; t + 1 < rounds.size(); ++t) {
            if (!rounds[t].mapped_px || !rounds[t + 1].mapped_px) continue;
            const bool a = t < r.per_depth.size() && r.per_depth[t];
            const bool b = t + 1 < r.per_depth.size() && r.per_depth[t + 1];
            if (!a && !b) continue;
            pairs.push_back({pixel_distance(*rounds[t].mapped_px,
                                            *rounds[t + 1].mapped_px),
                             a && b});
        }
    }
    return pairs;
}

struct CalibrationResult {
    double tau = 0.0;      ///< classify distance < tau as a correct pair
    double accuracy = 0.0; ///< classification accuracy at tau
    double correct_mean = 0.0;
    double error_mean = 0.0;
    std::vector<std::pair<double, double>> sweep; // (threshold, accuracy)
};

/// Published reference operating point from large-scale trace calibration
/// (UI-Venus-72B on ScreenSpot-Pro); not reproducible without those traces.
/// The default 50 px gate is this value rounded to a unified boundary.
inline constexpr double kReferenceCalibrationTauPx = 50.7;
inline constexpr double kReferenceCalibrationAccuracy = 0.918;

/// Find the threshold that best separates correct pairs (small, stable
/// refinements) from error pairs (large drifts). Accuracy as a function of
/// the threshold is piecewise constant with breakpoints at the observed
/// distances, so sweeping the midpoints between consecutive sorted unique
/// distances (plus 0 and max+1) covers every achievable classifier; ties go
/// to the smallest threshold.
inline CalibrationResult calibrate_threshold(
    const std::vector<ConsecutivePair>& pairs)
{
    size_t n_correct = 0;
    size_t n_error = 0;
    for (const auto& p : pairs) {
        (p.correct_pair ? n_correct : n_error) += 1;
    }
    if (n_correct == 0 || n_error == 0) {
        throw std::invalid_argument(
            "calibrate_threshold: need at least one pair of each label");
    }

    std::vector<double> uniq;
    uniq.reserve(pairs.size());
    for (const auto& p : pairs) uniq.push_back(p.distance);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

    std::vector<double> candidates;
    candidates.push_back(0.0);
    for (size_t i = 0; i + 1 < uniq.size(); ++i) {
        candidates.push_back((uniq[i] + uniq[i + 1]) / 2.0);
    }
    candidates.push_back(uniq.back() + 1.0);

    CalibrationResult res;
    double correct_sum = 0.0;
    double error_sum = 0.0;
    for (const auto& p : pairs) {
        (p.correct_pair ? correct_sum : error_sum) += p.distance;
    }
    res.correct_mean = correct_sum / static_cast<double>(n_correct);
    res.error_mean = error_sum / static_cast<double>(n_error);

    bool first = true;
    for (const double tau : candidates) {
        size_t hits = 0;
        for (const auto& p : pairs) {
            const bool predicted_correct = p.distance < tau;
            if (predicted_correct == p.correct_pair) ++hits;
        }
        const double acc = static_cast<double>(hits) / pairs.size();
        res.sweep.emplace_back(tau, acc);
        if (first || acc > res.accuracy) {
            res.accuracy = acc;
            res.tau = tau;
            first = false;
        }
    }
    return res;
}

inline void write_pairs_csv(const std::vector<ConsecutivePair>& pairs,
                            const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "distance,label\n";
    for (const auto& p : pairs) {
        out << p.distance << ',' << (p.correct_pair ? "correct" : "error")
            << '\n';
    }
}

inline std::vector<ConsecutivePair> read_pairs_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pairs CSV: " + path);
    std::vector<ConsecutivePair> pairs;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (line_no == 1 && line.rfind("distance", 0) == 0) continue;
        const size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::runtime_error("pairs CSV line " +
                                     std::to_string(line_no) +
                                     ": expected distance,label");
        }
        ConsecutivePair p;
        try {
            p.distance = std::stod(line.substr(0, comma));
        } catch (const std::exception&) {
            throw std::runtime_error("pairs CSV line " +
                                     std::to_string(line_no) +
                                     ": bad distance");
        }
        std::string label = line.substr(comma + 1);
        while (!label.empty() && (label.back() == '\r' || label.back() == ' ')) {
            label.pop_back();
        }
        if (label == "correct" || label == "1") {
            p.correct_pair = true;
        } else if (label == "error" || label == "0") {
            p.correct_pair = false;
        } else {
            throw std::runtime_error("pairs CSV line " +
                                     std::to_string(line_no) +
                                     ": unknown label '" + label + "'");
        }
        if (p.distance < 0.0) {
            throw std::runtime_error("pairs CSV line " +
                                     std::to_string(line_no) +
                                     ": negative distance");
        }
        pairs.push_back(p);
    }
    return pairs;
}

} // namespace zoomclick
