#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>

#include "zoomclick/geometry.hpp"
#include "zoomclick/grounder.hpp"
#include "zoomclick/rng.hpp"

namespace zoomclick {

/// Noise model for the synthetic oracle. Prediction error scales with the
/// view, so zooming in genuinely improves the click, which is exactly the
/// behavior the pipeline statistics need to surface.
struct OracleNoiseModel {
    double sigma_ratio = 0.0; ///< error std as a fraction of min(view dims)
    double miss_rate = 0.0;   ///< probability of a NoTarget response
    uint64_t seed = 0;

    void validate() const
    {
        if (sigma_ratio < 0.0) {
            throw std::invalid_argument("OracleNoiseModel: sigma_ratio < 0");
        }
        if (miss_rate < 0.0 || miss_rate > 1.0) {
            throw std::invalid_argument("OracleNoiseModel: miss_rate not in [0,1]");
        }
    }
};

namespace detail {

inline uint64_t oracle_stream_seed(const OracleNoiseModel& noise,
                                   const GroundingQuery& q, int round_index)
{
    uint64_t s = noise.seed;
    s = hash_mix(s, fnv1a(q.sample_id));
    s = hash_mix(s, fnv1a(q.instruction));
    s = hash_mix(s, static_cast<uint64_t>(round_index));
    s = hash_mix(s, static_cast<uint64_t>(q.view.left));
    s = hash_mix(s, static_cast<uint64_t>(q.view.top));
    s = hash_mix(s, static_cast<uint64_t>(q.view.width));
    s = hash_mix(s, static_cast<uint64_t>(q.view.height));
    return s;
}

} // namespace detail

/// Simulated grounding call. `truth_in_crop` is the visible part of the
/// ground-truth box in crop coordinates. Returns NoTarget with probability
/// miss_rate, otherwise the truth center pixel perturbed by Gaussian noise
/// with std sigma_ratio * min(crop dims), clamped to the view.
///
/// The noiseless point is the integer center pixel (not the fractional
/// midpoint) so it survives the map-and-round trip back to original pixels
/// inside the truth box, down to 1-px targets.
///
/// Deterministic given (seed, round_index, query identity): every call
/// derives a private stream, so concurrent or reordered evaluation cannot
/// change any draw.
inline GroundingOutcome oracle_ground(const GroundingQuery& q,
                                      const PixelBox& truth_in_crop,
                                      const OracleNoiseModel& noise,
                                      int round_index)
{
    noise.validate();
    if (truth_in_crop.empty()) {
        throw std::invalid_argument("oracle_ground: truth does not intersect crop");
    }
    SplitMix64 rng(detail::oracle_stream_seed(noise, q, round_index));
    if (rng.uniform() < noise.miss_rate) {
        return GroundingOutcome::no_target();
    }
    const PixelPoint c = truth_in_crop.center();
    const double sigma =
        noise.sigma_ratio * std::min(q.crop_width(), q.crop_height());
    const double px = c.x + rng.gauss() * sigma;
    const double py = c.y + rng.gauss() * sigma;
    return GroundingOutcome::make_point(px / q.crop_width(),
                                        py / q.crop_height());
}

/// Grounder backed by ground-truth boxes (original-image pixels, one per
/// sample id). Views that do not intersect the truth produce NoTarget, the
/// way a model cannot find an element that is not on screen.
/// Immutable after construction; safe to share across worker threads.
class OracleGrounder final : public Grounder {
public:
    explicit OracleGrounder(OracleNoiseModel noise) : noise_(noise)
    {
        noise_.validate();
    }

    void add_truth(const std::string& sample_id, const PixelBox& box)
    {
        truths_[sample_id] = box;
    }

    const OracleNoiseModel& noise() const { return noise_; }

    GroundingOutcome ground(const GroundingQuery& q) override
    {
        const PixelBox truth = truth_for(q.sample_id);
        const PixelBox visible = intersect(truth, q.view);
        if (visible.empty()) {
            return GroundingOutcome::no_target();
        }
        const PixelBox in_crop{visible.left - q.view.left,
                               visible.top - q.view.top, visible.width,
                               visible.height};
        return oracle_ground(q, in_crop, noise_, q.round_index);
    }

    std::string name() const override { return "oracle"; }

protected:
    PixelBox truth_for(const std::string& sample_id) const
    {
        const auto it = truths_.find(sample_id);
        if (it == truths_.end()) {
            throw std::runtime_error("oracle grounder: no ground truth for sample '" +
                                     sample_id + "'");
        }
        return it->second;
    }

    OracleNoiseModel noise_;

private:
    std::unordered_map<std::string, PixelBox> truths_;
};

} // namespace zoomclick
