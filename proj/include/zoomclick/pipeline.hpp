#pragma once

#include <chrono>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zoomclick/geometry.hpp"
#include "zoomclick/grounder.hpp"
#include "zoomclick/image.hpp"

namespace zoomclick {

/// Tuning knobs for one zoom run. Defaults are the recommended operating
/// point: three rounds, halving crops with a 768 px context floor, 2x2
/// pre-zoom consensus gated at 50 px, clip boundary handling.
struct ZoomConfig {
    int depth = 3;                       ///< T: grounding rounds
    std::vector<double> schedule = {0.5}; ///< shrink ratios; one value repeats
    int min_crop = 768;                  ///< m: context floor in pixels
    bool prezoom = true;
    int grid_rows = 2;
    int grid_cols = 2;
    double tau = 50.0;                   ///< pre-zoom agreement gate, pixels
    BoundaryMode boundary = BoundaryMode::Clip;

    void validate() const
    {
        if (depth < 1) throw std::invalid_argument("ZoomConfig: depth < 1");
        if (min_crop < 1) throw std::invalid_argument("ZoomConfig: min_crop < 1");
        if (tau < 0.0) throw std::invalid_argument("ZoomConfig: tau < 0");
        if (grid_rows < 1 || grid_cols < 1) {
            throw std::invalid_argument("ZoomConfig: degenerate pre-zoom grid");
        }
        if (schedule.empty()) {
            throw std::invalid_argument("ZoomConfig: empty shrink schedule");
        }
        if (schedule.size() != 1 &&
            schedule.size() < static_cast<size_t>(depth) - 1) {
            throw std::invalid_argument(
                "ZoomConfig: schedule must have one entry or at least depth-1");
        }
        for (const double rho : schedule) {
            if (!(rho > 0.0 && rho < 1.0)) {
                throw std::invalid_argument("ZoomConfig: shrink ratio not in (0,1)");
            }
        }
    }

    /// Shrink ratio for the 0-based transition (round t -> t+1).
    double rho_at(int transition) const
    {
        return schedule.size() == 1 ? schedule[0]
                                    : schedule.at(static_cast<size_t>(transition));
    }
};

/// Collapse a multi-step schedule into the single equivalent shrink: the
/// product of all executed ratios, with the depth reduced to match. Lets a
/// two-step x1/2 run be compared against a one-step x1/4 run by config alone.
inline ZoomConfig schedule_equivalent_one_step(const ZoomConfig& config)
{
    config.validate();
    if (config.depth <= 2) {
        return config;
    }
    double product = 1.0;
    for (int i = 0; i < config.depth - 1; ++i) {
        product *= config.rho_at(i);
    }
    ZoomConfig out = config;
    out.schedule = {product};
    out.depth = 2;
    return out;
}

/// Everything observed during the pre-zoom consensus round: the global
/// prediction, each tile's mapped prediction, tile-to-global distances, and
/// which candidate won.
struct PreZoomRecord {
    GroundingOutcome global_outcome;
    std::optional<PixelPoint> global;          // mapped to original pixels
    std::vector<PixelBox> tile_boxes;
    std::vector<GroundingOutcome> tile_outcomes;
    std::vector<std::optional<PixelPoint>> tiles;
    std::vector<std::optional<double>> distances; // d_k, valid tiles only
    std::optional<int> chosen_tile;   // consensus pick: min d_k < tau
    std::optional<int> fallback_tile; // global failed; tile nearest center
    double tau = 0.0;
    double wall_ms = 0.0;
};

struct PreZoomResult {
    std::optional<PixelPoint> start; // empty: every call failed
    PreZoomRecord record;
};

/// One grounding round of the zoom loop. `raw` is relative to `crop`;
/// `mapped` is the same prediction in original-image coordinates, obtained
/// through the viewport so it can be re-derived exactly from the record.
struct RoundRecord {
    int index = 0; // 1-based
    Viewport viewport;
    PixelBox crop;
    GroundingOutcome raw;
    std::optional<NormPoint> mapped;
    std::optional<PixelPoint> mapped_px;
    double wall_ms = 0.0;
};

enum class Termination { DepthReached, MinCropReached, NoTarget };

inline const char* to_string(Termination t)
{
    switch (t) {
        case Termination::DepthReached: return "depth-reached";
        case Termination::MinCropReached: return "min-crop-reached";
        case Termination::NoTarget: return "no-target";
    }
    return "?";
}

inline Termination termination_from_string(const std::string& s)
{
    if (s == "depth-reached") return Termination::DepthReached;
    if (s == "min-crop-reached") return Termination::MinCropReached;
    if (s == "no-target") return Termination::NoTarget;
    throw std::invalid_argument("unknown termination reason: " + s);
}

/// Full outcome of one zoom run. `clicks[d]` is the click that would be
/// emitted if the run stopped at depth d+1 (the latest valid prediction), so
/// a single trajectory yields the whole accuracy-vs-depth curve.
struct ZoomResult {
    std::optional<PixelPoint> final_click;
    Termination reason = Termination::NoTarget;
    std::optional<PreZoomRecord> prezoom;
    std::vector<RoundRecord> rounds;
    std::vector<std::optional<PixelPoint>> clicks;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
}

} // namespace detail

/// Pre-zoom consensus: ground once on the full image and once per grid tile,
/// map everything to original pixels, and adopt the tile prediction closest
/// to the global one when that distance is under tau. Tiles that fail are
/// excluded; if the global call fails, the valid tile nearest the image
/// center stands in; if every call fails the start is empty.
inline PreZoomResult pre_zoom(const Image& image,
                              const std::string& instruction,
                              Grounder& grounder, int grid_rows,
                              int grid_cols, double tau,
                              const std::string& sample_id = "")
{
    const auto t0 = std::chrono::steady_clock::now();
    const int w = image.width();
    const int h = image.height();

    PreZoomResult res;
    res.record.tau = tau;
    res.record.tile_boxes = patch_grid(w, h, grid_rows, grid_cols);
    const auto& tiles = res.record.tile_boxes;

    // The K+1 calls are independent; issue them together.
    auto call = [&](const PixelBox& view) {
        return std::async(std::launch::async, [&, view] {
            return grounder.ground(
                {sample_id, instruction, &image, view, 1});
        });
    };
    auto global_future = call(image.bounds());
    std::vector<std::future<GroundingOutcome>> tile_futures;
    tile_futures.reserve(tiles.size());
    for (const auto& tile : tiles) {
        tile_futures.push_back(call(tile));
    }

    res.record.global_outcome = global_future.get();
    if (res.record.global_outcome.is_point()) {
        res.record.global =
            to_pixels(res.record.global_outcome.point, w, h);
    }
    for (size_t k = 0; k < tiles.size(); ++k) {
        GroundingOutcome out = tile_futures[k].get();
        std::optional<PixelPoint> mapped;
        if (out.is_point()) {
            const NormPoint p =
                map_to_original(out.point, viewport_from_box(tiles[k], w, h));
            mapped = to_pixels(p, w, h);
        }
        res.record.tile_outcomes.push_back(std::move(out));
        res.record.tiles.push_back(mapped);
        res.record.distances.emplace_back();
    }

    if (res.record.global) {
        // Agreement test: nearest valid tile wins if within tau.
        std::optional<int> best;
        for (size_t k = 0; k < tiles.size(); ++k) {
            if (!res.record.tiles[k]) continue;
            const double d =
                pixel_distance(*res.record.global, *res.record.tiles[k]);
            res.record.distances[k] = d;
            if (!best || d < *res.record.distances[static_cast<size_t>(*best)]) {
                best = static_cast<int>(k);
            }
        }
        if (best &&
            *res.record.distances[static_cast<size_t>(*best)] < tau) {
            res.record.chosen_tile = best;
            res.start = res.record.tiles[static_cast<size_t>(*best)];
        } else {
            res.start = res.record.global;
        }
    } else {
        // No global anchor: fall back to the valid tile nearest the center.
        const PixelPoint center{w / 2, h / 2};
        std::optional<int> best;
        double best_d = 0.0;
        for (size_t k = 0; k < tiles.size(); ++k) {
            if (!res.record.tiles[k]) continue;
            const double d = pixel_distance(center, *res.record.tiles[k]);
            if (!best || d < best_d) {
                best = static_cast<int>(k);
                best_d = d;
            }
        }
        if (best) {
            res.record.fallback_tile = best;
            res.start = res.record.tiles[static_cast<size_t>(*best)];
        }
    }
    res.record.wall_ms = detail::elapsed_ms(t0);
    return res;
}

/// Run the full zoom loop for one sample: a pre-zoom (or plain global)
/// first round, then repeated shrink-and-recrop rounds. Crops are always
/// placed in original-image pixels, so mapping errors never compound.
///
/// Termination, checked after every round in this order: the round failed
/// (NoTarget/ParseFailure/TransportError -> keep the last valid click), the
/// crop just used was at the context floor in both dimensions, or the
/// configured depth is exhausted.
inline ZoomResult zoom_click(const Image& image,
                             const std::string& instruction,
                             Grounder& grounder, const ZoomConfig& config,
                             const std::string& sample_id = "")
{
    config.validate();
    const int w = image.width();
    const int h = image.height();

    ZoomResult res;
    PixelBox crop = image.bounds();
    Viewport viewport = Viewport::full();

    for (int t = 1; t <= config.depth; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        RoundRecord round;
        round.index = t;
        round.viewport = viewport;
        round.crop = crop;

        if (t == 1 && config.prezoom) {
            PreZoomResult pre = pre_zoom(image, instruction, grounder,
                                         config.grid_rows, config.grid_cols,
                                         config.tau, sample_id);
            res.prezoom = pre.record;
            if (pre.start) {
                // The chosen point is already in original pixels; express it
                // as a round-1 prediction on the full-image viewport.
                round.raw = GroundingOutcome::make_point(
                    static_cast<double>(pre.start->x) / w,
                    static_cast<double>(pre.start->y) / h);
            } else {
                round.raw = pre.record.global_outcome;
            }
            round.wall_ms = pre.record.wall_ms;
        } else {
            round.raw =
                grounder.ground({sample_id, instruction, &image, crop, t});
            round.wall_ms = detail::elapsed_ms(t0);
        }

        if (round.raw.is_point()) {
            round.mapped = map_to_original(round.raw.point, viewport);
            round.mapped_px = to_pixels(*round.mapped, w, h);
            res.clicks.push_back(round.mapped_px);
        } else {
            res.clicks.push_back(res.clicks.empty()
                                     ? std::optional<PixelPoint>{}
                                     : res.clicks.back());
        }
        const bool failed = !round.raw.is_point();
        res.rounds.push_back(std::move(round));

        if (failed) {
            res.reason = Termination::NoTarget;
            break;
        }
        if (crop.width <= config.min_crop && crop.height <= config.min_crop) {
            res.reason = Termination::MinCropReached;
            break;
        }
        if (t == config.depth) {
            res.reason = Termination::DepthReached;
            break;
        }

        // Shrink relative to the crop actually used, then re-center on the
        // latest prediction in original coordinates.
        const auto [next_w, next_h] = next_crop_size(
            crop.width, crop.height, config.rho_at(t - 1), config.min_crop);
        crop = place_window(*res.rounds.back().mapped_px, next_w, next_h, w,
                            h, config.boundary);
        viewport = viewport_from_box(crop, w, h);
    }

    res.final_click = res.clicks.empty() ? std::optional<PixelPoint>{}
                                         : res.clicks.back();
    return res;
}

} // namespace zoomclick
