#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomclick/geometry.hpp"
#include "zoomclick/rng.hpp"
#include "zoomclick/serialize.hpp"

namespace zoomclick {

/// One benchmark sample. `image_path` may be empty for synthetic samples,
/// in which case the stated dimensions stand in for a real screenshot and
/// only geometry-driven backends (oracle, mock) can evaluate it.
struct GroundingSample {
    std::string id;
    std::string image_path;
    int image_width = 0;
    int image_height = 0;
    std::string instruction;
    PixelBox gt_box; // original-image pixels
    std::map<std::string, std::string> tags;
};

inline void to_json(nlohmann::json& j, const GroundingSample& s)
{
    j = nlohmann::json{
        {"id", s.id},
        {"image_width", s.image_width},
        {"image_height", s.image_height},
        {"instruction", s.instruction},
        {"bbox", s.gt_box},
        {"tags", s.tags},
    };
    if (!s.image_path.empty()) j["image"] = s.image_path;
}

inline void from_json(const nlohmann::json& j, GroundingSample& s)
{
    s.id = j.at("id").get<std::string>();
    s.image_path = j.value("image", std::string{});
    s.image_width = j.at("image_width").get<int>();
    s.image_height = j.at("image_height").get<int>();
    s.instruction = j.at("instruction").get<std::string>();
    s.gt_box = j.at("bbox").get<PixelBox>();
    s.tags = j.value("tags", std::map<std::string, std::string>{});
}

/// Load a line-delimited manifest (one JSON sample per line, UTF-8).
///
/// Malformed JSON is a hard error naming the line. Invariant violations
/// (duplicate ids, degenerate dimensions, ground truth outside the image,
/// empty instructions) are collected across the whole file and reported
/// together. A sample whose image file is referenced but missing is skipped
/// with a warning rather than failing the load.
inline std::vector<GroundingSample> load_dataset(
    const std::string& path, std::vector<std::string>* warnings = nullptr)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open dataset manifest: " + path);
    }
    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };

    std::vector<GroundingSample> samples;
    std::vector<std::string> violations;
    std::set<std::string> seen_ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j =
            nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) {
            throw std::runtime_error("malformed manifest line " +
                                     std::to_string(line_no) + " in " + path);
        }
        GroundingSample s;
        try {
            s = j.get<GroundingSample>();
        } catch (const std::exception& e) {
            throw std::runtime_error("manifest line " + std::to_string(line_no) +
                                     ": " + e.what());
        }

        if (!seen_ids.insert(s.id).second) {
            violations.push_back("duplicate sample id '" + s.id + "'");
            continue;
        }
        if (s.id.empty()) {
            violations.push_back("line " + std::to_string(line_no) +
                                 ": empty sample id");
            continue;
        }
        if (s.image_width < 1 || s.image_height < 1) {
            violations.push_back("sample '" + s.id +
                                 "': degenerate image dimensions");
            continue;
        }
        if (s.instruction.empty()) {
            violations.push_back("sample '" + s.id + "': empty instruction");
            continue;
        }
        if (s.gt_box.empty() || s.gt_box.left < 0 || s.gt_box.top < 0 ||
            s.gt_box.right() > s.image_width ||
            s.gt_box.bottom() > s.image_height) {
            violations.push_back("sample '" + s.id +
                                 "': ground-truth box outside image");
            continue;
        }
        if (!s.image_path.empty()) {
            std::filesystem::path img(s.image_path);
            if (img.is_relative()) {
                img = std::filesystem::path(path).parent_path() / img;
            }
            if (!std::filesystem::exists(img)) {
                warn("sample '" + s.id + "': image file missing (" +
                     img.string() + "), skipped");
                continue;
            }
            s.image_path = img.string();
        }
        samples.push_back(std::move(s));
    }

    if (!violations.empty()) {
        std::ostringstream oss;
        oss << "dataset validation failed (" << violations.size() << " problem"
            << (violations.size() == 1 ? "" : "s") << "):";
        for (const auto& v : violations) oss << "\n  - " << v;
        throw std::runtime_error(oss.str());
    }
    if (samples.empty()) {
        warn("manifest " + path + " contains no samples");
    }
    return samples;
}

inline void write_manifest(const std::vector<GroundingSample>& samples,
                           const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write manifest: " + path);
    }
    for (const auto& s : samples) {
        out << nlohmann::json(s).dump() << '\n';
    }
}

/// Recipe for a randomly placed synthetic dataset.
struct SyntheticSpec {
    int count = 100;
    int image_width = 1920;
    int image_height = 1080;
    int box_width = 19;
    int box_height = 19;
    uint64_t seed = 1;
};

/// Deterministically generate samples with targets placed uniformly inside
/// the image. Tags cycle through representative domain/kind values so
/// grouped aggregation has something to chew on.
inline std::vector<GroundingSample> make_synthetic_dataset(
    const SyntheticSpec& spec)
{
    if (spec.count < 0 || spec.image_width < 1 || spec.image_height < 1 ||
        spec.box_width < 1 || spec.box_height < 1 ||
        spec.box_width > spec.image_width ||
        spec.box_height > spec.image_height) {
        throw std::invalid_argument("make_synthetic_dataset: bad spec");
    }
    static const char* kDomains[] = {"Development", "Creative", "CAD",
                                     "Scientific",  "Office",   "OS"};
    static const char* kKinds[] = {"text", "icon"};

    SplitMix64 rng(hash_mix(spec.seed, 0x5a3cf0b6u));
    std::vector<GroundingSample> out;
    out.reserve(static_cast<size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        GroundingSample s;
        std::ostringstream id;
        id << "synth-" << std::setw(4) << std::setfill('0') << i;
        s.id = id.str();
        s.image_width = spec.image_width;
        s.image_height = spec.image_height;
        s.gt_box = {rng.uniform_int(0, spec.image_width - spec.box_width),
                    rng.uniform_int(0, spec.image_height - spec.box_height),
                    spec.box_width, spec.box_height};
        s.instruction = "click the synthetic target #" + std::to_string(i);
        s.tags["domain"] = kDomains[i % 6];
        s.tags["kind"] = kKinds[i % 2];
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace zoomclick
