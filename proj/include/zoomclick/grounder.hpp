#pragma once

#include <algorithm>
#include <cctype>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomclick/geometry.hpp"
#include "zoomclick/image.hpp"

namespace zoomclick {

/// One request to a grounding model: locate `instruction` inside the `view`
/// region of `image`. The view is always expressed in original-image pixels;
/// backends that ship pixels encode image->crop(view). `sample_id` and
/// `round_index` identify the call for logging and for deterministic
/// synthetic backends.
struct GroundingQuery {
    std::string sample_id;
    std::string instruction;
    const Image* image = nullptr;
    PixelBox view;
    int round_index = 0;

    int crop_width() const { return view.width; }
    int crop_height() const { return view.height; }
};

/// What came back from one grounding call. A Point is normalized to the
/// queried view. ParseFailure keeps the raw model text; TransportError means
/// the endpoint could not be reached within the retry budget.
struct GroundingOutcome {
    enum class Kind { Point, NoTarget, ParseFailure, TransportError };

    Kind kind = Kind::NoTarget;
    NormPoint point;
    std::string raw;      // model text (ParseFailure) or transport detail
    bool clamped = false; // point fell outside the view and was clamped

    bool is_point() const { return kind == Kind::Point; }

    static GroundingOutcome make_point(double x, double y)
    {
        GroundingOutcome o;
        o.kind = Kind::Point;
        o.clamped = x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0;
        o.point = {std::clamp(x, 0.0, 1.0), std::clamp(y, 0.0, 1.0)};
        return o;
    }

    static GroundingOutcome no_target()
    {
        return GroundingOutcome{};
    }

    static GroundingOutcome parse_failure(std::string raw_text)
    {
        GroundingOutcome o;
        o.kind = Kind::ParseFailure;
        o.raw = std::move(raw_text);
        return o;
    }

    static GroundingOutcome transport_error(std::string detail)
    {
        GroundingOutcome o;
        o.kind = Kind::TransportError;
        o.raw = std::move(detail);
        return o;
    }
};

inline const char* to_string(GroundingOutcome::Kind kind)
{
    switch (kind) {
        case GroundingOutcome::Kind::Point: return "point";
        case GroundingOutcome::Kind::NoTarget: return "no-target";
        case GroundingOutcome::Kind::ParseFailure: return "parse-failure";
        case GroundingOutcome::Kind::TransportError: return "transport-error";
    }
    return "?";
}

/// Interface every grounding backend implements. Implementations must be
/// shareable across concurrently evaluated samples and must never throw on
/// malformed model output: every failure maps to a non-Point outcome.
class Grounder {
public:
    virtual ~Grounder() = default;
    virtual GroundingOutcome ground(const GroundingQuery& query) = 0;
    virtual std::string name() const = 0;
};

namespace detail {

// Parses a decimal number (optional sign/fraction) starting at `i`.
inline bool parse_number(const std::string& s, size_t& i, double& out)
{
    size_t j = i;
    if (j < s.size() && (s[j] == '-' || s[j] == '+')) ++j;
    size_t digits_start = j;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j < s.size() && s[j] == '.') {
        ++j;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    }
    if (j == digits_start ||
        (j == digits_start + 1 && s[digits_start] == '.')) {
        return false;
    }
    try {
        out = std::stod(s.substr(i, j - i));
    } catch (const std::exception&) {
        return false; // absurdly long digit runs overflow double
    }
    i = j;
    return true;
}

// Numbers inside the first [...] group; nullopt when no group closes.
inline std::optional<std::vector<double>> first_bracket_numbers(
    const std::string& text)
{
    const size_t open = text.find('[');
    if (open == std::string::npos) return std::nullopt;
    const size_t close = text.find(']', open + 1);
    if (close == std::string::npos) return std::nullopt;
    std::vector<double> nums;
    size_t i = open + 1;
    while (i < close) {
        const char c = text[i];
        if (c == '-' || c == '+' || c == '.' ||
            std::isdigit(static_cast<unsigned char>(c))) {
            double v = 0.0;
            if (!parse_number(text, i, v)) return std::nullopt;
            nums.push_back(v);
        } else {
            ++i;
        }
    }
    return nums;
}

} // namespace detail

/// Parse a bbox-protocol response ("... [x1, y1, x2, y2] ..."), pixel
/// coordinates in crop space. Returns the bbox center normalized by the crop
/// dimensions; the first bracket group decides, and anything other than
/// exactly four numbers in it is a ParseFailure.
inline GroundingOutcome parse_bbox_response(const std::string& text,
                                            int crop_w, int crop_h)
{
    if (crop_w < 1 || crop_h < 1) {
        throw std::invalid_argument("parse_bbox_response: degenerate crop");
    }
    const auto nums = detail::first_bracket_numbers(text);
    if (!nums || nums->size() != 4) {
        return GroundingOutcome::parse_failure(text);
    }
    const double cx = ((*nums)[0] + (*nums)[2]) / 2.0;
    const double cy = ((*nums)[1] + (*nums)[3]) / 2.0;
    return GroundingOutcome::make_point(cx / crop_w, cy / crop_h);
}

/// Parse a tool-call-protocol response: the first <tool_call> block must
/// contain JSON with arguments.coordinate = [x, y] in crop pixels.
inline GroundingOutcome parse_toolcall_response(const std::string& text,
                                                int crop_w, int crop_h)
{
    if (crop_w < 1 || crop_h < 1) {
        throw std::invalid_argument("parse_toolcall_response: degenerate crop");
    }
    static constexpr const char* kOpen = "<tool_call>";
    static constexpr const char* kClose = "</tool_call>";
    const size_t open = text.find(kOpen);
    if (open == std::string::npos) {
        return GroundingOutcome::parse_failure(text);
    }
    const size_t body = open + std::char_traits<char>::length(kOpen);
    const size_t close = text.find(kClose, body);
    if (close == std::string::npos) {
        return GroundingOutcome::parse_failure(text);
    }
    const auto payload = nlohmann::json::parse(
        text.substr(body, close - body), nullptr, /*allow_exceptions=*/false);
    if (payload.is_discarded() || !payload.is_object()) {
        return GroundingOutcome::parse_failure(text);
    }
    const auto args = payload.find("arguments");
    if (args == payload.end() || !args->is_object()) {
        return GroundingOutcome::parse_failure(text);
    }
    const auto coord = args->find("coordinate");
    if (coord == args->end() || !coord->is_array() || coord->size() != 2 ||
        !(*coord)[0].is_number() || !(*coord)[1].is_number()) {
        return GroundingOutcome::parse_failure(text);
    }
    const double x = (*coord)[0].get<double>();
    const double y = (*coord)[1].get<double>();
    return GroundingOutcome::make_point(x / crop_w, y / crop_h);
}

/// Always predicts the same normalized point. Useful as a plumbing probe:
/// the pipeline runs end to end with zero model dependencies.
class ConstantGrounder final : public Grounder {
public:
    explicit ConstantGrounder(NormPoint p = {0.5, 0.5}) : point_(p) {}

    GroundingOutcome ground(const GroundingQuery&) override
    {
        return GroundingOutcome::make_point(point_.x, point_.y);
    }

    std::string name() const override { return "mock"; }

private:
    NormPoint point_;
};

/// Always fails with the given outcome kind.
class FailingGrounder final : public Grounder {
public:
    explicit FailingGrounder(
        GroundingOutcome::Kind kind = GroundingOutcome::Kind::NoTarget)
        : kind_(kind)
    {
    }

    GroundingOutcome ground(const GroundingQuery&) override
    {
        GroundingOutcome o;
        o.kind = kind_;
        if (kind_ == GroundingOutcome::Kind::ParseFailure) o.raw = "(stub)";
        return o;
    }

    std::string name() const override { return "failing-mock"; }

private:
    GroundingOutcome::Kind kind_;
};

} // namespace zoomclick
