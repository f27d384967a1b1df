#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kbse/config.hpp"

using namespace kbse;

TEST_CASE("config parsing with sections and comments") {
    const std::string text =
        "# run settings\n"
        "[run]\n"
        "env = mountain_car\n"
        "seed = 42\n"
        "training_steps = 1234   ; inline comment\n"
        "noise_sigma = 0.02\n"
        "\n"
        "[policy]\n"
        "learning_rate = 5e-4\n"
        "batch_size = 64\n"
        "[shield]\n"
        "preemptive = true\n";
    const RunConfig cfg = run_config_from_values(parse_config_text(text));
    CHECK(cfg.env_name == "mountain_car");
    CHECK(cfg.seed == 42);
    CHECK(cfg.training_horizon == 1234);
    CHECK(cfg.noise_sigma == doctest::Approx(0.02));
    CHECK(cfg.learning_rate == doctest::Approx(5e-4));
    CHECK(cfg.batch_size == 64);
    CHECK(cfg.preemptive_shield);
}

TEST_CASE("unknown keys are rejected by name") {
    const std::string text = "[run]\nenv = pendulum\nwarp_speed = 9\n";
    try {
        run_config_from_values(parse_config_text(text));
        FAIL("expected an error");
    } catch (const ArgumentError& e) {
        CHECK(std::string(e.what()).find("run.warp_speed") != std::string::npos);
    }
}

TEST_CASE("unknown sections are rejected via their keys") {
    const std::string text = "[rocket]\nthrust = 11\n";
    CHECK_THROWS_AS(run_config_from_values(parse_config_text(text)), ArgumentError);
}

TEST_CASE("malformed values are rejected with the key named") {
    const std::string text = "[run]\nseed = banana\n";
    try {
        run_config_from_values(parse_config_text(text));
        FAIL("expected an error");
    } catch (const ArgumentError& e) {
        CHECK(std::string(e.what()).find("run.seed") != std::string::npos);
    }
}

TEST_CASE("malformed lines report the line number") {
    CHECK_THROWS_AS(parse_config_text("[run\nenv = pendulum\n"), ArgumentError);
    CHECK_THROWS_AS(parse_config_text("keyvalue\n"), ArgumentError);
}

TEST_CASE("missing config file is an argument error") {
    CHECK_THROWS_AS(run_config_from_file("/nonexistent/kbse.conf"), ArgumentError);
}

TEST_CASE("defaults survive an empty config") {
    const RunConfig cfg = run_config_from_values(parse_config_text(""));
    CHECK(cfg.env_name == "pendulum");
    CHECK(cfg.training_horizon == 50000);
    CHECK(cfg.epoch_length == 10000);
    CHECK(cfg.barrier_sample_size == 500);
    CHECK(cfg.zeta == doctest::Approx(1e-5));
}
