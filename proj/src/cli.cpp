#include "kbse/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "kbse/config.hpp"
#include "kbse/log.hpp"
#include "kbse/reports.hpp"

namespace kbse {

namespace {

std::atomic<bool> g_stop{false};

void handle_interrupt(int) { g_stop.store(true); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
}

struct TrainArgs {
    std::string config_path;
    std::string out_dir = "out";
    long seed = -1;
    std::string env_override;
};

int cmd_train(const TrainArgs& args) {
    RunConfig cfg = run_config_from_file(args.config_path);
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    if (!args.env_override.empty()) cfg.env_name = args.env_override;

    g_stop.store(false);
    cfg.stop_flag = &g_stop;
    std::signal(SIGINT, handle_interrupt);

    const RunResult result = run_kbse(cfg);
    std::signal(SIGINT, SIG_DFL);

    std::filesystem::create_directories(args.out_dir);
    const std::string base = args.out_dir + "/";
    save_policy(result.policy, base + "policy.json");
    save_barrier(result.barrier, base + "barrier.json");
    write_text(base + "metrics.jsonl", metrics_to_jsonl(result.metrics));
    save_transitions_jsonl(result.buffer.transitions, base + "buffer.jsonl");
    write_text(base + "summary.json", summary_to_json(result, cfg));

    std::cout << summary_to_json(result, cfg) << "\n";
    if (result.barrier.valid) {
        std::cout << "certificate: unsafe-reach probability over " << result.barrier.horizon_T
                  << " steps <= " << result.barrier.delta << " (confidence "
                  << 1.0 - result.zeta << ")";
        if (result.barrier.delta >= 1.0) std::cout << " [vacuous]";
        std::cout << "\n";
    } else {
        std::cout << "no valid barrier: no safety guarantee\n";
    }
    if (g_stop.load()) std::cout << "interrupted: checkpoints flushed to " << args.out_dir << "\n";
    return 0;
}

struct EvalArgs {
    std::string policy_path;
    std::string barrier_path;
    int episodes = 100;
    long seed = 0;
    std::string env_override;
    std::string out_path;
};

int cmd_eval(const EvalArgs& args) {
    const PolicyParams policy = load_policy(args.policy_path);
    const BarrierModel barrier = load_barrier(args.barrier_path);

    std::string env_name = !args.env_override.empty() ? args.env_override : policy.env_name;
    if (env_name.empty())
        throw ArgumentError("eval: environment unknown; pass --env or use a checkpoint "
                            "with env metadata");
    const EnvModel env =
        make_env(env_name, policy.env_noise_sigma, static_cast<std::uint64_t>(args.seed));

    EvalConfig ecfg;
    ecfg.episodes = args.episodes;
    ecfg.seed = static_cast<std::uint64_t>(args.seed);
    const EvalReport report = evaluate_policy(env, policy, &barrier, ecfg);

    const std::string text = eval_report_to_json(report);
    std::cout << text << "\n";
    if (!args.out_path.empty()) write_text(args.out_path, text + "\n");
    return 0;
}

struct CertifyArgs {
    std::string barrier_path;
    long horizon = -1;
    std::string env;
};

int cmd_certify(const CertifyArgs& args) {
    BarrierModel m = load_barrier(args.barrier_path);
    if (args.horizon > 0) {
        m.horizon_T = static_cast<int>(args.horizon);
        if (m.valid) m.delta = std::min(1.0, (m.eta + m.c * m.horizon_T) / m.nu);
    }

    std::cout << "eta       = " << m.eta << "\n"
              << "nu        = " << m.nu << "\n"
              << "c         = " << m.c << "\n"
              << "c_minmax  = " << m.c_minmax << "\n"
              << "b_bar     = " << m.b_bar << "\n"
              << "epsilon   = " << m.epsilon << "\n"
              << "zeta      = " << m.zeta << "\n"
              << "T         = " << m.horizon_T << "\n"
              << "delta     = " << m.delta << "\n";
    if (!m.valid) {
        std::cout << "invalid barrier: no guarantee\n";
        return 0;
    }
    std::cout << "certificate: P(reach unsafe set within " << m.horizon_T
              << " steps) <= " << m.delta << ", i.e. safety probability >= " << 1.0 - m.delta
              << ", with confidence " << 1.0 - m.zeta << "\n";
    if (m.delta >= 1.0) std::cout << "warning: vacuous certificate (delta = 1)\n";
    if (args.env == "pendulum")
        std::cout << "published pendulum benchmark reference: safety probability 0.643 "
                     "(comparison only)\n";
    return 0;
}

int cmd_inspect(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("inspect: cannot open '" + path + "'");
    std::string first_line;
    std::getline(in, first_line);
    in.clear();
    in.seekg(0);

    // JSONL artifacts (metrics, buffer) vs single-document JSON
    nlohmann::json j;
    bool jsonl = false;
    try {
        std::stringstream ss;
        ss << in.rdbuf();
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error&) {
        jsonl = true;
        j = nlohmann::json::parse(first_line);
    }

    if (jsonl) {
        if (j.contains("sp")) {
            std::cout << "transition buffer checkpoint; first record: " << j.dump() << "\n";
        } else if (j.contains("type")) {
            std::cout << "run metrics stream; first record: " << j.dump() << "\n";
        } else {
            std::cout << "unknown JSONL artifact; first record: " << j.dump() << "\n";
        }
        return 0;
    }

    if (j.contains("centers") && j.contains("alpha")) {
        std::cout << "barrier model: " << j["centers"].size() << " centers, eta=" << j["eta"]
                  << " nu=" << j["nu"] << " c=" << j["c"] << " delta=" << j["delta"]
                  << " valid=" << j["valid"] << "\n";
    } else if (j.contains("actor")) {
        std::cout << "policy checkpoint: state_dim=" << j["state_dim"]
                  << " action_dim=" << j["action_dim"] << " env="
                  << (j.contains("env") ? j["env"].value("name", std::string("?")) : "?") << "\n";
    } else if (j.contains("total_violations")) {
        std::cout << "run summary: " << j.dump(2) << "\n";
    } else if (j.contains("mean_reward")) {
        std::cout << "eval report: " << j.dump(2) << "\n";
    } else {
        std::cout << "unrecognized artifact: " << j.dump(2) << "\n";
    }
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"kbse: safe exploration with kernel barrier certificates"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train a policy with a barrier certificate");
    train->add_option("--config", train_args.config_path, "run configuration file")->required();
    train->add_option("--out", train_args.out_dir, "output directory");
    train->add_option("--seed", train_args.seed, "seed override");
    train->add_option("--env", train_args.env_override, "environment override");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "evaluate a saved policy under the shield");
    eval->add_option("--policy", eval_args.policy_path, "policy checkpoint")->required();
    eval->add_option("--barrier", eval_args.barrier_path, "barrier JSON")->required();
    eval->add_option("--episodes", eval_args.episodes, "number of evaluation episodes");
    eval->add_option("--seed", eval_args.seed, "evaluation seed");
    eval->add_option("--env", eval_args.env_override, "environment override");
    eval->add_option("--out", eval_args.out_path, "write the report to this path");

    CertifyArgs certify_args;
    auto* certify = app.add_subcommand("certify", "print a barrier certificate");
    certify->add_option("--barrier", certify_args.barrier_path, "barrier JSON")->required();
    certify->add_option("--horizon", certify_args.horizon, "recompute delta for this horizon");
    certify->add_option("--env", certify_args.env, "environment, for reference output");

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "describe an emitted artifact file");
    inspect->add_option("--file", inspect_path, "artifact path")->required();

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (certify->parsed()) return cmd_certify(certify_args);
        if (inspect->parsed()) return cmd_inspect(inspect_path);
        return 2;
    } catch (const ArgumentError& e) {
        log_error(e.what());
        return 2;
    } catch (const std::exception& e) {
        log_error(e.what());
        return 1;
    }
}

}  // namespace kbse
