#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomclick/dataset.hpp"
#include "zoomclick/http_grounder.hpp"
#include "zoomclick/oracle.hpp"
#include "zoomclick/pipeline.hpp"
#include "zoomclick/serialize.hpp"

namespace zoomclick {

/// One config file drives every command; command-line flags override file
/// values and the merged result is echoed into the run directory so any
/// reported number can be reproduced from its artifacts alone.
struct RunConfig {
    std::string grounder = "oracle"; // http-bbox | http-toolcall | oracle | mock
    EndpointConfig endpoint;
    ZoomConfig zoom;
    OracleNoiseModel oracle;
    NormPoint mock_point{0.5, 0.5};
    std::string dataset;
    std::string run_dir = "runs/default";
    int parallelism = 1;
    uint64_t seed = 0;
    std::vector<std::string> group_by;

    void validate() const
    {
        if (grounder != "http-bbox" && grounder != "http-toolcall" &&
            grounder != "oracle" && grounder != "mock" &&
            grounder != "mock-fail") {
            throw std::invalid_argument("unknown grounder kind: " + grounder);
        }
        zoom.validate();
        oracle.validate();
        if (parallelism < 1) {
            throw std::invalid_argument("parallelism must be >= 1");
        }
        if (grounder == "http-bbox" || grounder == "http-toolcall") {
            endpoint.validate();
        }
    }
};

namespace detail {

inline void check_keys(const nlohmann::json& j,
                       const std::set<std::string>& allowed,
                       const std::string& context)
{
    if (!j.is_object()) {
        throw std::invalid_argument("config: " + context + " must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            std::ostringstream oss;
            oss << "config: unknown key '" << key << "' in " << context
                << "; allowed:";
            for (const auto& k : allowed) oss << " " << k;
            throw std::invalid_argument(oss.str());
        }
    }
}

inline std::string resolve_path(const std::string& p,
                                const std::filesystem::path& base)
{
    std::filesystem::path path(p);
    if (path.is_relative()) path = base / path;
    return path.string();
}

} // namespace detail

inline void to_json(nlohmann::json& j, const EndpointConfig& e)
{
    j = nlohmann::json{{"base_url", e.base_url},
                       {"model", e.model},
                       {"protocol", to_string(e.protocol)},
                       {"timeout_s", e.timeout_s},
                       {"retries", e.retries},
                       {"auth_env", e.auth_env},
                       {"max_inflight", e.max_inflight}};
    if (!e.bbox_template_path.empty()) j["bbox_template"] = e.bbox_template_path;
    if (!e.toolcall_system_path.empty()) {
        j["toolcall_system_template"] = e.toolcall_system_path;
    }
    if (!e.toolcall_user_path.empty()) {
        j["toolcall_user_template"] = e.toolcall_user_path;
    }
    // auth_token deliberately not echoed
}

inline void to_json(nlohmann::json& j, const OracleNoiseModel& o)
{
    j = nlohmann::json{{"sigma_ratio", o.sigma_ratio},
                       {"miss_rate", o.miss_rate}};
}

inline void to_json(nlohmann::json& j, const RunConfig& c)
{
    j = nlohmann::json{{"grounder", c.grounder},
                       {"zoom", c.zoom},
                       {"oracle", c.oracle},
                       {"mock_point", c.mock_point},
                       {"dataset", c.dataset},
                       {"run_dir", c.run_dir},
                       {"parallelism", c.parallelism},
                       {"seed", c.seed},
                       {"group_by", c.group_by}};
    if (!c.endpoint.base_url.empty()) j["endpoint"] = c.endpoint;
}

/// Parse a config file, rejecting unknown keys at every level and resolving
/// relative paths against the file's directory. Referenced files (dataset,
/// prompt templates) must exist.
inline RunConfig load_run_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file: " + path);
    }
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw std::invalid_argument("config: " + path + " is not valid JSON");
    }
    const auto base = std::filesystem::path(path).parent_path();

    detail::check_keys(j,
                       {"grounder", "endpoint", "zoom", "oracle", "mock_point",
                        "dataset", "run_dir", "parallelism", "seed",
                        "group_by"},
                       "top level");
    RunConfig cfg;
    cfg.grounder = j.value("grounder", cfg.grounder);

    if (j.contains("endpoint")) {
        const auto& e = j["endpoint"];
        detail::check_keys(e,
                           {"base_url", "model", "protocol", "timeout_s",
                            "retries", "auth_env", "auth_token",
                            "max_inflight", "bbox_template",
                            "toolcall_system_template",
                            "toolcall_user_template"},
                           "endpoint");
        cfg.endpoint.base_url = e.value("base_url", std::string{});
        cfg.endpoint.model = e.value("model", std::string{});
        if (e.contains("protocol")) {
            cfg.endpoint.protocol =
                protocol_from_string(e["protocol"].get<std::string>());
        }
        cfg.endpoint.timeout_s = e.value("timeout_s", cfg.endpoint.timeout_s);
        cfg.endpoint.retries = e.value("retries", cfg.endpoint.retries);
        cfg.endpoint.auth_env = e.value("auth_env", cfg.endpoint.auth_env);
        cfg.endpoint.auth_token = e.value("auth_token", std::string{});
        cfg.endpoint.max_inflight =
            e.value("max_inflight", cfg.endpoint.max_inflight);
        for (auto [key, member] :
             {std::pair{"bbox_template", &cfg.endpoint.bbox_template_path},
              std::pair{"toolcall_system_template",
                        &cfg.endpoint.toolcall_system_path},
              std::pair{"toolcall_user_template",
                        &cfg.endpoint.toolcall_user_path}}) {
            if (e.contains(key)) {
                *member = detail::resolve_path(e[key].get<std::string>(), base);
                if (!std::filesystem::exists(*member)) {
                    throw std::invalid_argument(
                        "config: prompt template not found: " + *member);
                }
            }
        }
    }

    if (j.contains("zoom")) {
        const auto& z = j["zoom"];
        detail::check_keys(z,
                           {"depth", "schedule", "min_crop", "prezoom", "grid",
                            "tau", "boundary"},
                           "zoom");
        cfg.zoom.depth = z.value("depth", cfg.zoom.depth);
        if (z.contains("schedule")) {
            cfg.zoom.schedule = z["schedule"].get<std::vector<double>>();
        }
        cfg.zoom.min_crop = z.value("min_crop", cfg.zoom.min_crop);
        cfg.zoom.prezoom = z.value("prezoom", cfg.zoom.prezoom);
        if (z.contains("grid")) {
            cfg.zoom.grid_rows = z["grid"].at(0).get<int>();
            cfg.zoom.grid_cols = z["grid"].at(1).get<int>();
        }
        cfg.zoom.tau = z.value("tau", cfg.zoom.tau);
        if (z.contains("boundary")) {
            cfg.zoom.boundary =
                boundary_mode_from_string(z["boundary"].get<std::string>());
        }
    }

    if (j.contains("oracle")) {
        const auto& o = j["oracle"];
        detail::check_keys(o, {"sigma_ratio", "miss_rate"}, "oracle");
        cfg.oracle.sigma_ratio = o.value("sigma_ratio", 0.0);
        cfg.oracle.miss_rate = o.value("miss_rate", 0.0);
    }

    if (j.contains("mock_point")) {
        cfg.mock_point = j["mock_point"].get<NormPoint>();
    }
    if (j.contains("dataset")) {
        cfg.dataset =
            detail::resolve_path(j["dataset"].get<std::string>(), base);
        if (!std::filesystem::exists(cfg.dataset)) {
            throw std::invalid_argument("config: dataset not found: " +
                                        cfg.dataset);
        }
    }
    if (j.contains("run_dir")) {
        cfg.run_dir =
            detail::resolve_path(j["run_dir"].get<std::string>(), base);
    }
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("group_by")) {
        cfg.group_by = j["group_by"].get<std::vector<std::string>>();
    }
    cfg.validate();
    return cfg;
}

/// Instantiate the configured backend. Oracle backends are primed with the
/// dataset's ground truth. Returns the grounder plus its identity string
/// (what goes into the config hash).
inline std::pair<std::unique_ptr<Grounder>, std::string> make_grounder(
    const RunConfig& cfg, const std::vector<GroundingSample>& samples)
{
    if (cfg.grounder == "mock") {
        nlohmann::json id{{"kind", "mock"}, {"point", cfg.mock_point}};
        return {std::make_unique<ConstantGrounder>(cfg.mock_point), id.dump()};
    }
    if (cfg.grounder == "mock-fail") {
        return {std::make_unique<FailingGrounder>(), "{\"kind\":\"mock-fail\"}"};
    }
    if (cfg.grounder == "oracle") {
        OracleNoiseModel noise = cfg.oracle;
        noise.seed = cfg.seed;
        auto oracle = std::make_unique<OracleGrounder>(noise);
        for (const auto& s : samples) {
            oracle->add_truth(s.id, s.gt_box);
        }
        nlohmann::json id{{"kind", "oracle"},
                          {"sigma_ratio", noise.sigma_ratio},
                          {"miss_rate", noise.miss_rate}};
        return {std::move(oracle), id.dump()};
    }
    EndpointConfig ep = cfg.endpoint;
    ep.protocol = cfg.grounder == "http-toolcall" ? PromptProtocol::ToolCall
                                                  : PromptProtocol::BboxText;
    auto http = std::make_unique<HttpGrounder>(ep);
    std::string identity = http->identity();
    return {std::move(http), identity};
}

} // namespace zoomclick
