#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "zoomclick/http_grounder.hpp"

using namespace zoomclick;

namespace {

struct TestServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    TestServer()
    {
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~TestServer()
    {
        server.stop();
        thread.join();
    }

    std::string base_url() const
    {
        return "http://127.0.0.1:" + std::to_string(port) + "/v1";
    }
};

std::string chat_reply(const std::string& content)
{
    nlohmann::json j{
        {"choices",
         nlohmann::json::array(
             {{{"message", {{"role", "assistant"}, {"content", content}}}}})}};
    return j.dump();
}

Image tiny_image()
{
    std::vector<uint8_t> px(static_cast<size_t>(64) * 64 * 3, 128);
    return Image(64, 64, std::move(px));
}

EndpointConfig endpoint_for(const TestServer& server,
                            PromptProtocol protocol, int retries = 0)
{
    EndpointConfig cfg;
    cfg.base_url = server.base_url();
    cfg.model = "test-model";
    cfg.protocol = protocol;
    cfg.timeout_s = 10.0;
    cfg.retries = retries;
    return cfg;
}

} // namespace

TEST_CASE("http grounder round trip with the bbox protocol")
{
    TestServer server;
    nlohmann::json seen_body;
    std::string seen_auth;
    server.server.Post("/v1/chat/completions",
                       [&](const httplib::Request& req,
                           httplib::Response& res) {
                           seen_body = nlohmann::json::parse(req.body);
                           if (req.has_header("Authorization")) {
                               seen_auth = req.get_header_value("Authorization");
                           }
                           res.set_content(chat_reply("[0, 0, 64, 64]"),
                                           "application/json");
                       });

    EndpointConfig cfg = endpoint_for(server, PromptProtocol::BboxText);
    cfg.auth_token = "sekret";
    HttpGrounder grounder(cfg);

    const Image img = tiny_image();
    const GroundingQuery q{"s1", "the save button", &img, img.bounds(), 1};
    const auto outcome = grounder.ground(q);
    REQUIRE(outcome.is_point());
    CHECK(outcome.point.x == Catch::Approx(0.5));
    CHECK(outcome.point.y == Catch::Approx(0.5));

    CHECK(seen_auth == "Bearer sekret");
    CHECK(seen_body["model"] == "test-model");
    const std::string prompt =
        seen_body["messages"][0]["content"][1]["text"].get<std::string>();
    CHECK(prompt.find("the save button") != std::string::npos);
    CHECK(prompt.find("[x1, y1, x2, y2]") != std::string::npos);
    const std::string url = seen_body["messages"][0]["content"][0]["image_url"]
                                ["url"].get<std::string>();
    CHECK(url.rfind("data:image/png;base64,", 0) == 0);
}

TEST_CASE("http grounder round trip with the tool-call protocol")
{
    TestServer server;
    nlohmann::json seen_body;
    server.server.Post(
        "/v1/chat/completions",
        [&](const httplib::Request& req, httplib::Response& res) {
            seen_body = nlohmann::json::parse(req.body);
            res.set_content(
                chat_reply("<tool_call>\n{\"name\": \"computer_use\", "
                           "\"arguments\": {\"action\": \"left_click\", "
                           "\"coordinate\": [32, 16]}}\n</tool_call>"),
                "application/json");
        });

    HttpGrounder grounder(endpoint_for(server, PromptProtocol::ToolCall));
    const Image img = tiny_image();
    const auto outcome =
        grounder.ground({"s1", "the gear icon", &img, img.bounds(), 2});
    REQUIRE(outcome.is_point());
    CHECK(outcome.point.x == Catch::Approx(0.5));
    CHECK(outcome.point.y == Catch::Approx(0.25));

    REQUIRE(seen_body["messages"].size() == 2);
    CHECK(seen_body["messages"][0]["role"] == "system");
    const std::string sys =
        seen_body["messages"][0]["content"].get<std::string>();
    CHECK(sys.find("<tool_call>") != std::string::npos);
    const std::string user =
        seen_body["messages"][1]["content"][1]["text"].get<std::string>();
    CHECK(user.find("the gear icon") != std::string::npos);
}

TEST_CASE("transient server errors are retried")
{
    TestServer server;
    std::atomic<int> hits{0};
    server.server.Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                           if (++hits <= 2) {
                               res.status = 500;
                               return;
                           }
                           res.set_content(chat_reply("[0,0,64,64]"),
                                           "application/json");
                       });

    HttpGrounder grounder(
        endpoint_for(server, PromptProtocol::BboxText, /*retries=*/2));
    const Image img = tiny_image();
    const auto outcome =
        grounder.ground({"s1", "retry me", &img, img.bounds(), 1});
    REQUIRE(outcome.is_point());
    CHECK(hits.load() == 3);
}

TEST_CASE("exhausted retry budget surfaces a transport error")
{
    TestServer server;
    server.server.Post("/v1/chat/completions",
                       [](const httplib::Request&, httplib::Response& res) {
                           res.status = 503;
                       });
    HttpGrounder grounder(
        endpoint_for(server, PromptProtocol::BboxText, /*retries=*/1));
    const Image img = tiny_image();
    const auto outcome =
        grounder.ground({"s1", "down", &img, img.bounds(), 1});
    CHECK(outcome.kind == GroundingOutcome::Kind::TransportError);
    CHECK(outcome.raw.find("2 attempt(s)") != std::string::npos);
}

TEST_CASE("auth failures name the token env var")
{
    TestServer server;
    server.server.Post("/v1/chat/completions",
                       [](const httplib::Request&, httplib::Response& res) {
                           res.status = 401;
                       });
    HttpGrounder grounder(endpoint_for(server, PromptProtocol::BboxText));
    const Image img = tiny_image();
    CHECK_THROWS_WITH(
        grounder.ground({"s1", "auth", &img, img.bounds(), 1}),
        Catch::Matchers::ContainsSubstring("ZOOMCLICK_API_TOKEN"));
}

TEST_CASE("unparseable model output is a parse failure, not a retry")
{
    TestServer server;
    std::atomic<int> hits{0};
    server.server.Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                           ++hits;
                           res.set_content(chat_reply("try the top left?"),
                                           "application/json");
                       });
    HttpGrounder grounder(
        endpoint_for(server, PromptProtocol::BboxText, /*retries=*/3));
    const Image img = tiny_image();
    const auto outcome =
        grounder.ground({"s1", "vague", &img, img.bounds(), 1});
    CHECK(outcome.kind == GroundingOutcome::Kind::ParseFailure);
    CHECK(hits.load() == 1);
}

TEST_CASE("malformed completion envelopes are parse failures")
{
    TestServer server;
    server.server.Post("/v1/chat/completions",
                       [](const httplib::Request&, httplib::Response& res) {
                           res.set_content("{\"unexpected\": true}",
                                           "application/json");
                       });
    HttpGrounder grounder(endpoint_for(server, PromptProtocol::BboxText));
    const Image img = tiny_image();
    CHECK(grounder.ground({"s1", "x", &img, img.bounds(), 1}).kind ==
          GroundingOutcome::Kind::ParseFailure);
}

TEST_CASE("connection failure becomes a transport error")
{
    EndpointConfig cfg;
    cfg.base_url = "http://127.0.0.1:9/v1"; // discard port: nothing listens
    cfg.model = "m";
    cfg.retries = 0;
    cfg.timeout_s = 2.0;
    HttpGrounder grounder(cfg);
    const Image img = tiny_image();
    const auto outcome =
        grounder.ground({"s1", "nobody home", &img, img.bounds(), 1});
    CHECK(outcome.kind == GroundingOutcome::Kind::TransportError);
}

TEST_CASE("synthetic samples cannot be shipped to an endpoint")
{
    TestServer server;
    HttpGrounder grounder(endpoint_for(server, PromptProtocol::BboxText));
    const Image img = Image::synthetic(64, 64);
    CHECK_THROWS(grounder.ground({"s1", "x", &img, img.bounds(), 1}));
}

TEST_CASE("debug log elides image payloads")
{
    TestServer server;
    server.server.Post("/v1/chat/completions",
                       [](const httplib::Request&, httplib::Response& res) {
                           res.set_content(chat_reply("[0,0,64,64]"),
                                           "application/json");
                       });
    HttpGrounder grounder(endpoint_for(server, PromptProtocol::BboxText));
    std::vector<std::string> lines;
    grounder.set_debug_log([&](const std::string& s) { lines.push_back(s); });
    const Image img = tiny_image();
    grounder.ground({"s1", "x", &img, img.bounds(), 1});
    REQUIRE(lines.size() >= 2);
    CHECK(lines[0].find("base64") == std::string::npos);
    CHECK(lines[0].find("<png:") != std::string::npos);
}
