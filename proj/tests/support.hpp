#pragma once

// Shared helpers for the test suites: scripted/counting grounders, the
// biased-global oracle used by the pre-zoom benefit study, and trace
// comparison utilities.

#include <array>
#include <atomic>
#include <map>
#include <string>

#include "zoomclick/oracle.hpp"
#include "zoomclick/pipeline.hpp"
#include "zoomclick/serialize.hpp"

namespace zoomclick::testing {

/// Returns a fixed outcome per exact view box; anything unscripted fails
/// with NoTarget by default.
class ScriptedGrounder final : public Grounder {
public:
    void set(const PixelBox& view, GroundingOutcome outcome)
    {
        script_[key(view)] = std::move(outcome);
    }

    void set_default(GroundingOutcome outcome)
    {
        default_ = std::move(outcome);
    }

    GroundingOutcome ground(const GroundingQuery& q) override
    {
        ++calls_;
        const auto it = script_.find(key(q.view));
        return it == script_.end() ? default_ : it->second;
    }

    std::string name() const override { return "scripted"; }
    int calls() const { return calls_.load(); }

private:
    static std::array<int, 4> key(const PixelBox& b)
    {
        return {b.left, b.top, b.width, b.height};
    }

    std::map<std::array<int, 4>, GroundingOutcome> script_;
    GroundingOutcome default_ = GroundingOutcome::no_target();
    std::atomic<int> calls_{0};
};

/// Counts calls going through to an inner grounder.
class CountingGrounder final : public Grounder {
public:
    explicit CountingGrounder(Grounder& inner) : inner_(inner) {}

    GroundingOutcome ground(const GroundingQuery& q) override
    {
        ++calls_;
        return inner_.ground(q);
    }

    std::string name() const override { return inner_.name(); }
    int calls() const { return calls_.load(); }

private:
    Grounder& inner_;
    std::atomic<int> calls_{0};
};

/// Oracle variant for the pre-zoom benefit study: full-image queries carry a
/// systematic offset of `bias_ratio` times the image diagonal (direction
/// seeded per sample), while sub-view queries behave like the plain oracle.
/// Tile and crop predictions are therefore unbiased, and only the consensus
/// test can rescue the start point from the global offset.
class BiasedGlobalOracle final : public Grounder {
public:
    BiasedGlobalOracle(OracleNoiseModel noise, double bias_ratio)
        : noise_(noise), bias_ratio_(bias_ratio), subview_(noise)
    {
    }

    void add_truth(const std::string& id, const PixelBox& box)
    {
        truths_[id] = box;
        subview_.add_truth(id, box);
    }

    GroundingOutcome ground(const GroundingQuery& q) override
    {
        const bool is_global = q.view.left == 0 && q.view.top == 0 &&
            q.view.width == q.image->width() &&
            q.view.height == q.image->height();
        if (!is_global) {
            return subview_.ground(q);
        }
        const PixelBox truth = truths_.at(q.sample_id);
        SplitMix64 rng(detail::oracle_stream_seed(noise_, q, q.round_index));
        if (rng.uniform() < noise_.miss_rate) {
            return GroundingOutcome::no_target();
        }
        // Stable bias direction per sample, independent of the noise draws.
        SplitMix64 dir(hash_mix(noise_.seed ^ 0xb1a5ULL, fnv1a(q.sample_id)));
        const double angle = dir.uniform() * 2.0 * M_PI;
        const double diag = std::hypot(q.view.width, q.view.height);
        const double bias = bias_ratio_ * diag;
        const double sigma =
            noise_.sigma_ratio * std::min(q.view.width, q.view.height);
        const PixelPoint c = truth.center();
        const double px = c.x + bias * std::cos(angle) + rng.gauss() * sigma;
        const double py = c.y + bias * std::sin(angle) + rng.gauss() * sigma;
        return GroundingOutcome::make_point(px / q.view.width,
                                            py / q.view.height);
    }

    std::string name() const override { return "biased-global-oracle"; }

private:
    OracleNoiseModel noise_;
    double bias_ratio_;
    OracleGrounder subview_;
    std::map<std::string, PixelBox> truths_;
};

/// Serialized trace with wall-time fields removed, for bit-reproducibility
/// comparisons.
inline std::string trace_fingerprint(const ZoomResult& result)
{
    nlohmann::json j = result;
    for (auto& round : j["rounds"]) round.erase("ms");
    if (!j["prezoom"].is_null()) j["prezoom"].erase("ms");
    return j.dump();
}

} // namespace zoomclick::testing
