#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "zoomclick/dataset.hpp"
#include "zoomclick/image_io.hpp"

using namespace zoomclick;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args)
{
    const std::string cmd = std::string(ZOOMCLICK_CLI_PATH) + " " + args +
        " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult res;
    char buf[512];
    while (fgets(buf, sizeof(buf), pipe)) {
        res.output += buf;
    }
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

fs::path fresh_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "zoomclick_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream oss;
    oss << in.rdbuf();
    return oss.str();
}

} // namespace

TEST_CASE("cli ground with the mock backend")
{
    const fs::path dir = fresh_dir("ground");
    const fs::path png = dir / "screen.png";
    std::vector<uint8_t> px(static_cast<size_t>(200) * 100 * 3, 200);
    save_png(Image(200, 100, std::move(px)), png.string());
    const fs::path trace = dir / "trace.json";

    const auto res = run_cli("ground --image " + png.string() +
                             " --instruction \"anything\" --grounder mock"
                             " --trace " + trace.string());
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("click: (100, 50)") != std::string::npos);
    CHECK(res.output.find("reason:") != std::string::npos);
    REQUIRE(fs::exists(trace));
    const auto j = nlohmann::json::parse(slurp(trace));
    CHECK(j.contains("zoom"));
    CHECK(j["zoom"]["rounds"].is_array());
}

TEST_CASE("cli ground with an all-failure backend exits no-target")
{
    const fs::path dir = fresh_dir("ground_fail");
    const fs::path png = dir / "screen.png";
    std::vector<uint8_t> px(static_cast<size_t>(64) * 64 * 3, 10);
    save_png(Image(64, 64, std::move(px)), png.string());

    const auto res = run_cli("ground --image " + png.string() +
                             " --instruction x --grounder mock-fail --trace \"\"");
    CHECK(res.exit_code == 5);
    CHECK(res.output.find("no-target") != std::string::npos);
}

TEST_CASE("cli ground reports unreadable images as usage errors")
{
    const auto res = run_cli(
        "ground --image /no/such/file.png --instruction x --grounder mock");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("/no/such/file.png") != std::string::npos);
}

TEST_CASE("cli rejects unknown flags with a usage exit code")
{
    const auto res = run_cli("eval --definitely-not-a-flag");
    CHECK(res.exit_code == 2);
}

TEST_CASE("cli synth + eval with the noiseless oracle")
{
    const fs::path dir = fresh_dir("eval");
    const fs::path manifest = dir / "synth.jsonl";
    const fs::path run_dir = dir / "run";

    auto res = run_cli("synth --out " + manifest.string() +
                       " --count 20 --width 1920 --height 1080"
                       " --box-width 24 --box-height 24 --seed 11");
    REQUIRE(res.exit_code == 0);

    res = run_cli("eval --dataset " + manifest.string() + " --grounder oracle"
                  " --run-dir " + run_dir.string() +
                  " --depth 3 --min-crop 256 --seed 7 --group-by kind");
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("overall") != std::string::npos);
    CHECK(res.output.find("1.0000") != std::string::npos);
    CHECK(fs::exists(run_dir / "results.jsonl"));
    CHECK(fs::exists(run_dir / "metrics.csv"));
    CHECK(fs::exists(run_dir / "depth_curves.csv"));
    CHECK(fs::exists(run_dir / "effective_config.json"));
    CHECK(slurp(run_dir / "metrics.csv").find("overall,20,1.0000") !=
          std::string::npos);

    // rerunning is a no-op with identical outputs
    const std::string metrics_before = slurp(run_dir / "metrics.csv");
    res = run_cli("eval --dataset " + manifest.string() + " --grounder oracle"
                  " --run-dir " + run_dir.string() +
                  " --depth 3 --min-crop 256 --seed 7 --group-by kind");
    CHECK(res.exit_code == 0);
    CHECK(slurp(run_dir / "metrics.csv") == metrics_before);

    // changed config in the same run dir is refused
    res = run_cli("eval --dataset " + manifest.string() + " --grounder oracle"
                  " --run-dir " + run_dir.string() +
                  " --depth 4 --min-crop 256 --seed 7");
    CHECK(res.exit_code == 3);
}

TEST_CASE("cli bench and calibrate over an eval results log")
{
    const fs::path dir = fresh_dir("bench");
    const fs::path manifest = dir / "synth.jsonl";
    const fs::path run_dir = dir / "run";
    const fs::path bench_dir = dir / "bench_out";

    REQUIRE(run_cli("synth --out " + manifest.string() +
                    " --count 30 --width 1920 --height 1080"
                    " --box-width 20 --box-height 20 --seed 3")
                .exit_code == 0);
    // noisy oracle at depth 4: the bench needs four-round traces
    REQUIRE(run_cli("eval --dataset " + manifest.string() +
                    " --grounder oracle --run-dir " + run_dir.string() +
                    " --depth 4 --min-crop 128 --seed 9 --prezoom on")
                .exit_code == 0);

    auto res = run_cli("bench --results " +
                       (run_dir / "results.jsonl").string() + " --out " +
                       bench_dir.string());
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("easy_normal") != std::string::npos);
    CHECK(fs::exists(bench_dir / "bench_manifest.jsonl"));
    CHECK(fs::exists(bench_dir / "category_stats.csv"));
    CHECK(fs::exists(bench_dir / "pairs.csv"));

    const fs::path pairs = dir / "pairs.csv";
    std::ofstream out(pairs);
    out << "distance,label\n3,correct\n5,correct\n8,correct\n"
           "90,error\n120,error\n300,error\n";
    out.close();
    res = run_cli("calibrate --pairs " + pairs.string() + " --sweep-out " +
                  (dir / "sweep.csv").string());
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("49.0 px") != std::string::npos);
    CHECK(res.output.find("accuracy: 1.000") != std::string::npos);
    CHECK(fs::exists(dir / "sweep.csv"));
}

TEST_CASE("cli eval with a config file plus flag overrides")
{
    const fs::path dir = fresh_dir("config");
    const fs::path manifest = dir / "synth.jsonl";
    REQUIRE(run_cli("synth --out " + manifest.string() +
                    " --count 6 --width 1280 --height 720 --seed 2")
                .exit_code == 0);

    const fs::path config = dir / "run.json";
    std::ofstream out(config);
    out << nlohmann::json{
               {"grounder", "oracle"},
               {"dataset", "synth.jsonl"},
               {"run_dir", "run_a"},
               {"seed", 4},
               {"zoom",
                {{"depth", 3},
                 {"schedule", {0.5}},
                 {"min_crop", 256},
                 {"prezoom", false},
                 {"grid", {2, 2}},
                 {"tau", 50.0},
                 {"boundary", "clip"}}},
           }.dump();
    out.close();

    auto res = run_cli("eval --config " + config.string() + " --run-dir " +
                       (dir / "run_b").string());
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(dir / "run_b" / "metrics.csv"));
    CHECK_FALSE(fs::exists(dir / "run_a"));

    // unknown keys in the config file are rejected
    std::ofstream bad(config);
    bad << R"({"grounder":"oracle","mystery":1})";
    bad.close();
    res = run_cli("eval --config " + config.string());
    CHECK(res.exit_code == 3);
    CHECK(res.output.find("mystery") != std::string::npos);
}
