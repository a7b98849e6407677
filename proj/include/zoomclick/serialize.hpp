#pragma once

#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "zoomclick/geometry.hpp"
#include "zoomclick/grounder.hpp"
#include "zoomclick/pipeline.hpp"
#include "zoomclick/rng.hpp"

// JSON bindings for the trace vocabulary. Field names are part of the
// on-disk schema (results logs, trace files); change them and old runs stop
// resuming.

namespace zoomclick {

inline void to_json(nlohmann::json& j, const PixelPoint& p)
{
    j = nlohmann::json::array({p.x, p.y});
}

inline void from_json(const nlohmann::json& j, PixelPoint& p)
{
    p.x = j.at(0).get<int>();
    p.y = j.at(1).get<int>();
}

inline void to_json(nlohmann::json& j, const NormPoint& p)
{
    j = nlohmann::json::array({p.x, p.y});
}

inline void from_json(const nlohmann::json& j, NormPoint& p)
{
    p.x = j.at(0).get<double>();
    p.y = j.at(1).get<double>();
}

inline void to_json(nlohmann::json& j, const PixelBox& b)
{
    j = nlohmann::json::array({b.left, b.top, b.width, b.height});
}

inline void from_json(const nlohmann::json& j, PixelBox& b)
{
    b.left = j.at(0).get<int>();
    b.top = j.at(1).get<int>();
    b.width = j.at(2).get<int>();
    b.height = j.at(3).get<int>();
}

inline void to_json(nlohmann::json& j, const Viewport& v)
{
    j = nlohmann::json::array({v.x1, v.y1, v.x2, v.y2});
}

inline void from_json(const nlohmann::json& j, Viewport& v)
{
    v.x1 = j.at(0).get<double>();
    v.y1 = j.at(1).get<double>();
    v.x2 = j.at(2).get<double>();
    v.y2 = j.at(3).get<double>();
}

inline void to_json(nlohmann::json& j, const GroundingOutcome& o)
{
    j = nlohmann::json{{"kind", to_string(o.kind)}};
    if (o.is_point()) {
        j["p"] = o.point;
        if (o.clamped) j["clamped"] = true;
    }
    if (!o.raw.empty()) j["raw"] = o.raw;
}

inline void from_json(const nlohmann::json& j, GroundingOutcome& o)
{
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "point") {
        o.kind = GroundingOutcome::Kind::Point;
        o.point = j.at("p").get<NormPoint>();
        o.clamped = j.value("clamped", false);
    } else if (kind == "no-target") {
        o.kind = GroundingOutcome::Kind::NoTarget;
    } else if (kind == "parse-failure") {
        o.kind = GroundingOutcome::Kind::ParseFailure;
    } else if (kind == "transport-error") {
        o.kind = GroundingOutcome::Kind::TransportError;
    } else {
        throw std::invalid_argument("unknown outcome kind: " + kind);
    }
    o.raw = j.value("raw", std::string{});
}

namespace detail {

template <typename T>
nlohmann::json opt_json(const std::optional<T>& v)
{
    if (v) return nlohmann::json(*v);
    return nullptr;
}

template <typename T>
std::optional<T> opt_from_json(const nlohmann::json& j)
{
    if (j.is_null()) return std::nullopt;
    return j.get<T>();
}

} // namespace detail

inline void to_json(nlohmann::json& j, const PreZoomRecord& r)
{
    nlohmann::json tiles = nlohmann::json::array();
    for (const auto& t : r.tiles) tiles.push_back(detail::opt_json(t));
    nlohmann::json dists = nlohmann::json::array();
    for (const auto& d : r.distances) dists.push_back(detail::opt_json(d));
    j = nlohmann::json{
        {"global_outcome", r.global_outcome},
        {"global", detail::opt_json(r.global)},
        {"tile_boxes", r.tile_boxes},
        {"tile_outcomes", r.tile_outcomes},
        {"tiles", tiles},
        {"distances", dists},
        {"chosen_tile", detail::opt_json(r.chosen_tile)},
        {"fallback_tile", detail::opt_json(r.fallback_tile)},
        {"tau", r.tau},
        {"ms", r.wall_ms},
    };
}

inline void from_json(const nlohmann::json& j, PreZoomRecord& r)
{
    r.global_outcome = j.at("global_outcome").get<GroundingOutcome>();
    r.global = detail::opt_from_json<PixelPoint>(j.at("global"));
    r.tile_boxes = j.at("tile_boxes").get<std::vector<PixelBox>>();
    r.tile_outcomes =
        j.at("tile_outcomes").get<std::vector<GroundingOutcome>>();
    r.tiles.clear();
    for (const auto& t : j.at("tiles")) {
        r.tiles.push_back(detail::opt_from_json<PixelPoint>(t));
    }
    r.distances.clear();
    for (const auto& d : j.at("distances")) {
        r.distances.push_back(detail::opt_from_json<double>(d));
    }
    r.chosen_tile = detail::opt_from_json<int>(j.at("chosen_tile"));
    r.fallback_tile = detail::opt_from_json<int>(j.at("fallback_tile"));
    r.tau = j.at("tau").get<double>();
    r.wall_ms = j.at("ms").get<double>();
}

inline void to_json(nlohmann::json& j, const RoundRecord& r)
{
    j = nlohmann::json{
        {"t", r.index},
        {"viewport", r.viewport},
        {"crop", r.crop},
        {"raw", r.raw},
        {"mapped", detail::opt_json(r.mapped)},
        {"mapped_px", detail::opt_json(r.mapped_px)},
        {"ms", r.wall_ms},
    };
}

inline void from_json(const nlohmann::json& j, RoundRecord& r)
{
    r.index = j.at("t").get<int>();
    r.viewport = j.at("viewport").get<Viewport>();
    r.crop = j.at("crop").get<PixelBox>();
    r.raw = j.at("raw").get<GroundingOutcome>();
    r.mapped = detail::opt_from_json<NormPoint>(j.at("mapped"));
    r.mapped_px = detail::opt_from_json<PixelPoint>(j.at("mapped_px"));
    r.wall_ms = j.at("ms").get<double>();
}

inline void to_json(nlohmann::json& j, const ZoomResult& r)
{
    nlohmann::json clicks = nlohmann::json::array();
    for (const auto& c : r.clicks) clicks.push_back(detail::opt_json(c));
    j = nlohmann::json{
        {"final_click", detail::opt_json(r.final_click)},
        {"reason", to_string(r.reason)},
        {"prezoom", detail::opt_json(r.prezoom)},
        {"rounds", r.rounds},
        {"clicks", clicks},
    };
}

inline void from_json(const nlohmann::json& j, ZoomResult& r)
{
    r.final_click = detail::opt_from_json<PixelPoint>(j.at("final_click"));
    r.reason = termination_from_string(j.at("reason").get<std::string>());
    r.prezoom = detail::opt_from_json<PreZoomRecord>(j.at("prezoom"));
    r.rounds = j.at("rounds").get<std::vector<RoundRecord>>();
    r.clicks.clear();
    for (const auto& c : j.at("clicks")) {
        r.clicks.push_back(detail::opt_from_json<PixelPoint>(c));
    }
}

inline void to_json(nlohmann::json& j, const ZoomConfig& c)
{
    j = nlohmann::json{
        {"depth", c.depth},
        {"schedule", c.schedule},
        {"min_crop", c.min_crop},
        {"prezoom", c.prezoom},
        {"grid", {c.grid_rows, c.grid_cols}},
        {"tau", c.tau},
        {"boundary", to_string(c.boundary)},
    };
}

inline void from_json(const nlohmann::json& j, ZoomConfig& c)
{
    c.depth = j.at("depth").get<int>();
    c.schedule = j.at("schedule").get<std::vector<double>>();
    c.min_crop = j.at("min_crop").get<int>();
    c.prezoom = j.at("prezoom").get<bool>();
    c.grid_rows = j.at("grid").at(0).get<int>();
    c.grid_cols = j.at("grid").at(1).get<int>();
    c.tau = j.at("tau").get<double>();
    c.boundary = boundary_mode_from_string(j.at("boundary").get<std::string>());
}

/// Stable hex digest of a JSON value (canonical dump order from nlohmann's
/// sorted object keys). Used for config identity in run dirs.
inline std::string json_digest(const nlohmann::json& j)
{
    const uint64_t h = fnv1a(j.dump());
    std::ostringstream oss;
    oss << std::hex << h;
    return oss.str();
}

} // namespace zoomclick
