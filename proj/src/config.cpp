#include "kbse/config.hpp"

#include <fstream>
#include <sstream>

namespace kbse {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ArgumentError("config: key '" + key + "' has non-numeric value '" + v + "'");
    }
}

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ArgumentError("config: key '" + key + "' has non-integer value '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ArgumentError("config: key '" + key + "' has non-boolean value '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> values;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ArgumentError("config: malformed section header at line " +
                                    std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ArgumentError("config: expected 'key = value' at line " +
                                std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ArgumentError("config: empty key at line " + std::to_string(lineno));
        const std::string full = section.empty() ? key : section + "." + key;
        values[full] = value;
    }
    return values;
}

RunConfig run_config_from_values(const std::map<std::string, std::string>& values) {
    RunConfig cfg;
    for (const auto& [key, v] : values) {
        if (key == "run.env") cfg.env_name = v;
        else if (key == "run.noise_sigma") cfg.noise_sigma = to_double(key, v);
        else if (key == "run.seed") cfg.seed = static_cast<std::uint64_t>(to_long(key, v));
        else if (key == "run.training_steps") cfg.training_horizon = to_long(key, v);
        else if (key == "run.epoch_length") cfg.epoch_length = to_long(key, v);
        else if (key == "run.barrier_sample_size")
            cfg.barrier_sample_size = static_cast<int>(to_long(key, v));
        else if (key == "run.zeta") cfg.zeta = to_double(key, v);
        else if (key == "kernel.lambda") cfg.kernel.regularization_lambda = to_double(key, v);
        else if (key == "kernel.bandwidth_state") cfg.kernel.bandwidth_state = to_double(key, v);
        else if (key == "kernel.bandwidth_state_action")
            cfg.kernel.bandwidth_state_action = to_double(key, v);
        else if (key == "barrier.ridge_lambda") cfg.ridge_lambda = to_double(key, v);
        else if (key == "policy.learning_rate") cfg.learning_rate = to_double(key, v);
        else if (key == "policy.exploration_sigma") cfg.exploration_sigma = to_double(key, v);
        else if (key == "policy.discount_gamma") cfg.discount_gamma = to_double(key, v);
        else if (key == "policy.polyak") cfg.polyak = to_double(key, v);
        else if (key == "policy.batch_size") cfg.batch_size = static_cast<int>(to_long(key, v));
        else if (key == "policy.hidden_units") {
            const int h = static_cast<int>(to_long(key, v));
            cfg.hidden = {h, h};
        } else if (key == "shield.margin") cfg.shield_margin = to_double(key, v);
        else if (key == "shield.window_h") cfg.local_window_h = static_cast<int>(to_long(key, v));
        else if (key == "shield.preemptive") cfg.preemptive_shield = to_bool(key, v);
        else throw ArgumentError("config: unknown key '" + key + "'");
    }
    return cfg;
}

RunConfig run_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return run_config_from_values(parse_config_text(ss.str()));
}

}  // namespace kbse
