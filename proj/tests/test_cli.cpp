#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kbse/cli.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"kbse"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return kbse::cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("kbse_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_small_config(const fs::path& p, int seed) {
    std::ofstream out(p);
    out << "[run]\n"
        << "env = pendulum\n"
        << "seed = " << seed << "\n"
        << "training_steps = 400\n"
        << "epoch_length = 200\n"
        << "barrier_sample_size = 50\n"
        << "[policy]\n"
        << "hidden_units = 8\n"
        << "batch_size = 32\n";
}

}  // namespace

TEST_CASE("missing config file exits with the usage code") {
    CHECK(run_cli({"train", "--config", "/nonexistent/kbse.conf"}) == 2);
}

TEST_CASE("missing required flag exits with the usage code") {
    CHECK(run_cli({"train"}) == 2);
    CHECK(run_cli({"no_such_command"}) == 2);
}

TEST_CASE("train, eval, certify, and inspect round trip") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "run.conf";
    write_small_config(cfg, 21);
    const fs::path out = tmp.path / "out";

    CHECK(run_cli({"train", "--config", cfg.string(), "--out", out.string()}) == 0);
    CHECK(fs::exists(out / "policy.json"));
    CHECK(fs::exists(out / "barrier.json"));
    CHECK(fs::exists(out / "metrics.jsonl"));
    CHECK(fs::exists(out / "buffer.jsonl"));
    CHECK(fs::exists(out / "summary.json"));

    const std::string summary = slurp(out / "summary.json");
    CHECK(summary.find("total_violations") != std::string::npos);
    CHECK(summary.find("violation_p90_pct") != std::string::npos);
    CHECK(summary.find("confidence") != std::string::npos);

    const fs::path report = tmp.path / "eval.json";
    CHECK(run_cli({"eval", "--policy", (out / "policy.json").string(), "--barrier",
                   (out / "barrier.json").string(), "--episodes", "3", "--seed", "5", "--out",
                   report.string()}) == 0);
    const std::string rep = slurp(report);
    CHECK(rep.find("mean_reward") != std::string::npos);
    CHECK(rep.find("unsafe_ci95_high") != std::string::npos);

    CHECK(run_cli({"eval", "--policy", (out / "policy.json").string(), "--barrier",
                   (out / "barrier.json").string(), "--episodes", "0"}) == 0);

    CHECK(run_cli({"certify", "--barrier", (out / "barrier.json").string()}) == 0);
    CHECK(run_cli({"certify", "--barrier", (out / "barrier.json").string(), "--horizon", "50",
                   "--env", "pendulum"}) == 0);

    CHECK(run_cli({"inspect", "--file", (out / "barrier.json").string()}) == 0);
    CHECK(run_cli({"inspect", "--file", (out / "metrics.jsonl").string()}) == 0);
    CHECK(run_cli({"inspect", "--file", (out / "summary.json").string()}) == 0);
}

TEST_CASE("repeated seeds give byte-identical metrics and checkpoints") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "run.conf";
    write_small_config(cfg, 33);
    const fs::path out_a = tmp.path / "a";
    const fs::path out_b = tmp.path / "b";

    REQUIRE(run_cli({"train", "--config", cfg.string(), "--out", out_a.string()}) == 0);
    REQUIRE(run_cli({"train", "--config", cfg.string(), "--out", out_b.string()}) == 0);

    CHECK(slurp(out_a / "metrics.jsonl") == slurp(out_b / "metrics.jsonl"));
    CHECK(slurp(out_a / "barrier.json") == slurp(out_b / "barrier.json"));
    CHECK(slurp(out_a / "policy.json") == slurp(out_b / "policy.json"));
    CHECK(slurp(out_a / "buffer.jsonl") == slurp(out_b / "buffer.jsonl"));
}

TEST_CASE("eval with corrupt checkpoints fails with the runtime code") {
    TempDir tmp;
    const fs::path bad = tmp.path / "bad.json";
    std::ofstream(bad) << "{\"not\": \"a policy\"}";
    CHECK(run_cli({"eval", "--policy", bad.string(), "--barrier", bad.string()}) == 1);
}
