#include "kbse/reports.hpp"

#include <json.hpp>

#include <sstream>

namespace kbse {

std::string metrics_to_jsonl(const RunMetrics& metrics) {
    std::ostringstream out;
    for (const auto& e : metrics.episodes) {
        nlohmann::json j;
        j["type"] = "episode";
        j["index"] = e.index;
        j["end_step"] = e.end_step;
        j["reward"] = e.reward;
        j["cost"] = e.cost;
        j["length"] = e.length;
        out << j.dump() << "\n";
    }
    for (const auto& e : metrics.epochs) {
        nlohmann::json j;
        j["type"] = "epoch";
        j["index"] = e.index;
        j["end_step"] = e.end_step;
        j["eta"] = e.eta;
        j["nu"] = e.nu;
        j["c"] = e.c;
        j["c_minmax"] = e.c_minmax;
        j["b_bar"] = e.b_bar;
        j["epsilon"] = e.epsilon;
        j["delta"] = e.delta;
        j["delta_minmax"] = e.delta_minmax;
        j["valid"] = e.valid;
        j["accepted"] = e.accepted;
        out << j.dump() << "\n";
    }
    return out.str();
}

std::string summary_to_json(const RunResult& result, const RunConfig& config) {
    nlohmann::json j;
    j["env"] = config.env_name;
    j["seed"] = config.seed;
    j["steps"] = result.metrics.steps;
    j["episodes"] = result.metrics.episodes.size();
    j["total_violations"] = result.metrics.total_violations;
    j["violation_p90_pct"] = violation_p90_percent(result.metrics, result.metrics.steps);
    j["valid_barrier"] = result.barrier.valid;
    j["barrier_ever_valid"] = result.barrier_ever_valid;
    if (result.barrier.valid) {
        j["eta"] = result.barrier.eta;
        j["nu"] = result.barrier.nu;
        j["c"] = result.barrier.c;
        j["c_minmax"] = result.barrier.c_minmax;
        j["b_bar"] = result.barrier.b_bar;
        j["epsilon"] = result.barrier.epsilon;
        j["delta"] = result.barrier.delta;
        j["delta_minmax"] = result.barrier.delta_minmax;
        j["safety_probability"] = 1.0 - result.barrier.delta;
        j["vacuous_certificate"] = result.barrier.delta >= 1.0;
    } else {
        j["delta"] = nullptr;
        j["safety_probability"] = nullptr;
        j["no_valid_barrier"] = true;
    }
    j["zeta"] = result.zeta;
    j["confidence"] = 1.0 - result.zeta;
    j["wall_clock_sec"] = result.metrics.wall_clock_sec;
    return j.dump(2);
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["episodes"] = report.episodes;
    j["mean_reward"] = report.mean_reward;
    j["mean_cost"] = report.mean_cost;
    j["mean_length"] = report.mean_length;
    j["unsafe_episode_frequency"] = report.unsafe_episode_frequency;
    j["unsafe_ci95_low"] = report.unsafe_ci_low;
    j["unsafe_ci95_high"] = report.unsafe_ci_high;
    j["barrier_delta"] = report.barrier_delta;
    j["shielded"] = report.shielded;
    return j.dump(2);
}

}  // namespace kbse
