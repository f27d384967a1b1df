#include "kbse/agent.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <unordered_set>

#include "kbse/log.hpp"

namespace kbse {

// ---------------------------------------------------------------------------
// Replay buffer

std::vector<Transition> sample_transitions(const std::vector<Transition>& pool, std::size_t n,
                                           Rng& rng) {
    require(!pool.empty() || n == 0, "sample_transitions: empty pool");
    std::vector<Transition> out;
    out.reserve(n);
    if (n == 0) return out;

    if (pool.size() >= n) {
        // Floyd's algorithm: n distinct uniform indices.
        std::unordered_set<std::size_t> chosen;
        chosen.reserve(n * 2);
        for (std::size_t j = pool.size() - n; j < pool.size(); ++j) {
            std::uniform_int_distribution<std::size_t> d(0, j);
            const std::size_t t = d(rng);
            if (chosen.insert(t).second) {
                out.push_back(pool[t]);
            } else {
                chosen.insert(j);
                out.push_back(pool[j]);
            }
        }
    } else {
        out.insert(out.end(), pool.begin(), pool.end());
        std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
        while (out.size() < n) out.push_back(pool[d(rng)]);
    }
    return out;
}

void ReplayBuffer::push(Transition t) {
    require(t.finite(), "ReplayBuffer::push: non-finite transition");
    transitions.push_back(std::move(t));
    if (capacity > 0 && transitions.size() > capacity)
        transitions.erase(transitions.begin(),
                          transitions.begin() +
                              static_cast<std::ptrdiff_t>(transitions.size() - capacity));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    require(!transitions.empty() || n == 0, "ReplayBuffer::sample: empty buffer");
    return sample_transitions(transitions, n, rng);
}

std::vector<Transition> ReplayBuffer::last(std::size_t h) const {
    const std::size_t m = std::min(h, transitions.size());
    return {transitions.end() - static_cast<std::ptrdiff_t>(m), transitions.end()};
}

namespace {

nlohmann::json vec_to_json(const Vec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vec vec_from_json(const nlohmann::json& a, const char* what) {
    if (!a.is_array()) throw std::runtime_error(std::string("expected array for ") + what);
    Vec v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i];
    return v;
}

}  // namespace

void save_transitions_jsonl(const std::vector<Transition>& transitions, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_transitions_jsonl: cannot open " + path);
    for (const auto& t : transitions) {
        nlohmann::json j;
        j["s"] = vec_to_json(t.s);
        j["a"] = vec_to_json(t.a);
        j["r"] = t.r;
        j["sp"] = vec_to_json(t.s_plus);
        out << j.dump() << "\n";
    }
}

std::vector<Transition> load_transitions_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_transitions_jsonl: cannot open " + path);
    std::vector<Transition> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        Transition t;
        t.s = vec_from_json(j.at("s"), "field 's'");
        t.a = vec_from_json(j.at("a"), "field 'a'");
        t.r = j.at("r").get<double>();
        t.s_plus = vec_from_json(j.at("sp"), "field 'sp'");
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// MLP

Mlp Mlp::zeros(const std::vector<int>& dims) {
    require(dims.size() >= 2, "Mlp: need at least input and output dims");
    Mlp net;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        net.w.push_back(Mat::Zero(dims[l + 1], dims[l]));
        net.b.push_back(Vec::Zero(dims[l + 1]));
    }
    return net;
}

Mlp Mlp::random(const std::vector<int>& dims, Rng& rng) {
    Mlp net = zeros(dims);
    for (std::size_t l = 0; l < net.w.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(net.w[l].cols()));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index i = 0; i < net.w[l].rows(); ++i)
            for (Eigen::Index j = 0; j < net.w[l].cols(); ++j) net.w[l](i, j) = u(rng);
        for (Eigen::Index i = 0; i < net.b[l].size(); ++i) net.b[l][i] = u(rng);
    }
    return net;
}

Eigen::Index Mlp::param_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < w.size(); ++l) n += w[l].size() + b[l].size();
    return n;
}

Vec Mlp::flat() const {
    Vec theta(param_count());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        for (Eigen::Index j = 0; j < w[l].cols(); ++j)
            for (Eigen::Index i = 0; i < w[l].rows(); ++i) theta[k++] = w[l](i, j);
        for (Eigen::Index i = 0; i < b[l].size(); ++i) theta[k++] = b[l][i];
    }
    return theta;
}

void Mlp::set_flat(const Vec& theta) {
    require(theta.size() == param_count(), "Mlp::set_flat: size mismatch");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        for (Eigen::Index j = 0; j < w[l].cols(); ++j)
            for (Eigen::Index i = 0; i < w[l].rows(); ++i) w[l](i, j) = theta[k++];
        for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l][i] = theta[k++];
    }
}

Mat mlp_forward(const Mlp& net, const Mat& x, MlpTape* tape) {
    require(!net.w.empty(), "mlp_forward: empty network");
    require(x.rows() == net.w[0].cols(), "mlp_forward: input dimension mismatch");
    if (tape) {
        tape->act.clear();
        tape->act.push_back(x);
    }
    Mat h = x;
    const int last = net.layers() - 1;
    for (int l = 0; l <= last; ++l) {
        Mat pre = (net.w[static_cast<std::size_t>(l)] * h).colwise() +
                  net.b[static_cast<std::size_t>(l)];
        h = (l < last) ? pre.array().tanh().matrix() : pre;
        if (tape) tape->act.push_back(h);
    }
    return h;
}

Mat Mlp::forward(const Mat& x) const { return mlp_forward(*this, x, nullptr); }

MlpGrad mlp_backward(const Mlp& net, const MlpTape& tape, const Mat& dout, Mat* dinput) {
    const int last = net.layers() - 1;
    require(static_cast<int>(tape.act.size()) == net.layers() + 1,
            "mlp_backward: tape does not match network");

    MlpGrad g;
    g.w.resize(net.w.size());
    g.b.resize(net.b.size());

    Mat delta = dout;  // gradient at the (linear) output of the last layer
    for (int l = last; l >= 0; --l) {
        const std::size_t ul = static_cast<std::size_t>(l);
        g.w[ul] = delta * tape.act[ul].transpose();
        g.b[ul] = delta.rowwise().sum();
        if (l > 0) {
            // propagate through tanh of the previous layer's output
            const Mat& z = tape.act[ul];
            Mat back = net.w[ul].transpose() * delta;
            delta = back.cwiseProduct((1.0 - z.array().square()).matrix());
        } else if (dinput) {
            *dinput = net.w[0].transpose() * delta;
        }
    }
    return g;
}

Vec MlpGrad::flat() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < w.size(); ++l) n += w[l].size() + b[l].size();
    Vec theta(n);
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        for (Eigen::Index j = 0; j < w[l].cols(); ++j)
            for (Eigen::Index i = 0; i < w[l].rows(); ++i) theta[k++] = w[l](i, j);
        for (Eigen::Index i = 0; i < b[l].size(); ++i) theta[k++] = b[l][i];
    }
    return theta;
}

bool MlpGrad::finite() const {
    for (std::size_t l = 0; l < w.size(); ++l)
        if (!w[l].allFinite() || !b[l].allFinite()) return false;
    return true;
}

AdamState make_adam(const Mlp& net) {
    AdamState s;
    for (std::size_t l = 0; l < net.w.size(); ++l) {
        s.mw.push_back(Mat::Zero(net.w[l].rows(), net.w[l].cols()));
        s.vw.push_back(Mat::Zero(net.w[l].rows(), net.w[l].cols()));
        s.mb.push_back(Vec::Zero(net.b[l].size()));
        s.vb.push_back(Vec::Zero(net.b[l].size()));
    }
    return s;
}

void adam_step(Mlp& net, AdamState& state, const MlpGrad& grad, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    state.step += 1;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < net.w.size(); ++l) {
        state.mw[l] = b1 * state.mw[l] + (1.0 - b1) * grad.w[l];
        state.vw[l] = b2 * state.vw[l] + (1.0 - b2) * grad.w[l].cwiseProduct(grad.w[l]);
        net.w[l] -= (lr * (state.mw[l] / corr1).array() /
                     ((state.vw[l] / corr2).array().sqrt() + eps))
                        .matrix();
        state.mb[l] = b1 * state.mb[l] + (1.0 - b1) * grad.b[l];
        state.vb[l] = b2 * state.vb[l] + (1.0 - b2) * grad.b[l].cwiseProduct(grad.b[l]);
        net.b[l] -= (lr * (state.mb[l] / corr1).array() /
                     ((state.vb[l] / corr2).array().sqrt() + eps))
                        .matrix();
    }
}

// ---------------------------------------------------------------------------
// Actor-critic

PolicyParams make_policy(int state_dim, const Box& action_box, const std::vector<int>& hidden,
                         Rng& rng) {
    require(state_dim >= 1, "make_policy: state_dim must be positive");
    require(action_box.dim() >= 1, "make_policy: empty action box");

    PolicyParams p;
    p.state_dim = state_dim;
    p.action_dim = static_cast<int>(action_box.dim());
    p.action_box = action_box;
    p.hidden = hidden;

    std::vector<int> actor_dims = {state_dim};
    std::vector<int> critic_dims = {state_dim + p.action_dim};
    for (int h : hidden) {
        actor_dims.push_back(h);
        critic_dims.push_back(h);
    }
    actor_dims.push_back(p.action_dim);
    critic_dims.push_back(1);

    p.actor = Mlp::random(actor_dims, rng);
    p.critic = Mlp::random(critic_dims, rng);
    p.actor_target = p.actor;
    p.critic_target = p.critic;
    p.actor_opt = make_adam(p.actor);
    p.critic_opt = make_adam(p.critic);
    return p;
}

Mat policy_actions(const Mlp& actor, const Box& action_box, const Mat& states) {
    const Mat raw = actor.forward(states);
    const Vec center = action_box.center();
    const Vec half = action_box.half_width();
    Mat out = raw.array().tanh().matrix();
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        out.col(j) = center + half.cwiseProduct(out.col(j));
    return out;
}

Vec act(const PolicyParams& policy, const Vec& s, bool explore, Rng& rng) {
    require(s.allFinite(), "act: non-finite state");
    require(s.size() == policy.state_dim, "act: state dimension mismatch");
    Vec a = policy_actions(policy.actor, policy.action_box, s);
    if (explore && policy.exploration_sigma > 0.0) {
        std::normal_distribution<double> n(0.0, policy.exploration_sigma);
        for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += n(rng);
    }
    return policy.action_box.clip(a);
}

std::pair<double, MlpGrad> critic_loss_grad(const Mlp& critic, const Mat& sa,
                                            const Eigen::RowVectorXd& targets) {
    require(sa.cols() == targets.cols(), "critic_loss_grad: batch size mismatch");
    const double m = static_cast<double>(sa.cols());
    MlpTape tape;
    const Mat q = mlp_forward(critic, sa, &tape);
    const Eigen::RowVectorXd resid = q.row(0) - targets;
    const double loss = resid.squaredNorm() / m;
    const Mat dout = (2.0 / m) * resid;
    MlpGrad grad = mlp_backward(critic, tape, dout, nullptr);
    return {loss, std::move(grad)};
}

std::pair<double, MlpGrad> actor_objective_grad(const Mlp& actor, const Mlp& critic,
                                                const Mat& states, const Box& action_box) {
    const double m = static_cast<double>(states.cols());
    const Vec center = action_box.center();
    const Vec half = action_box.half_width();

    MlpTape actor_tape;
    const Mat raw = mlp_forward(actor, states, &actor_tape);
    const Mat squashed = raw.array().tanh().matrix();
    Mat actions(squashed.rows(), squashed.cols());
    for (Eigen::Index j = 0; j < actions.cols(); ++j)
        actions.col(j) = center + half.cwiseProduct(squashed.col(j));

    Mat sa(states.rows() + actions.rows(), states.cols());
    sa << states, actions;

    MlpTape critic_tape;
    const Mat q = mlp_forward(critic, sa, &critic_tape);
    const double objective = q.row(0).mean();

    // dJ/d(critic input), keep only the action rows.
    Mat dinput;
    const Mat dq = Mat::Constant(1, sa.cols(), 1.0 / m);
    mlp_backward(critic, critic_tape, dq, &dinput);
    const Mat da = dinput.bottomRows(actions.rows());

    // through the tanh squash and box scaling
    Mat draw = da.cwiseProduct((1.0 - squashed.array().square()).matrix());
    for (Eigen::Index j = 0; j < draw.cols(); ++j)
        draw.col(j) = draw.col(j).cwiseProduct(half);

    MlpGrad grad = mlp_backward(actor, actor_tape, draw, nullptr);
    return {objective, std::move(grad)};
}

UpdateStats update_policy(PolicyParams& policy, const std::vector<Transition>& batch) {
    require(!batch.empty(), "update_policy: empty batch");
    const Eigen::Index m = static_cast<Eigen::Index>(batch.size());
    const Eigen::Index p = policy.state_dim, q = policy.action_dim;

    Mat states(p, m), actions(q, m), next_states(p, m);
    Eigen::RowVectorXd rewards(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Transition& t = batch[static_cast<std::size_t>(i)];
        require(t.s.size() == p && t.a.size() == q, "update_policy: transition dims mismatch");
        states.col(i) = t.s;
        actions.col(i) = t.a;
        next_states.col(i) = t.s_plus;
        rewards[i] = t.r;
    }

    // TD target through the target copies
    const Mat next_actions = policy_actions(policy.actor_target, policy.action_box, next_states);
    Mat nsa(p + q, m);
    nsa << next_states, next_actions;
    const Mat next_q = policy.critic_target.forward(nsa);
    const Eigen::RowVectorXd targets = rewards + policy.discount_gamma * next_q.row(0);

    Mat sa(p + q, m);
    sa << states, actions;

    UpdateStats stats;
    auto [closs, cgrad] = critic_loss_grad(policy.critic, sa, targets);
    auto [avalue, agrad] = actor_objective_grad(policy.actor, policy.critic, states,
                                                policy.action_box);
    stats.critic_loss = closs;
    stats.actor_value = avalue;

    if (!cgrad.finite() || !agrad.finite()) {
        stats.skipped = true;
        log_warn("update_policy: non-finite gradient, step skipped");
        return stats;
    }

    adam_step(policy.critic, policy.critic_opt, cgrad, policy.learning_rate);
    // ascend the critic's value
    for (auto& gw : agrad.w) gw = -gw;
    for (auto& gb : agrad.b) gb = -gb;
    adam_step(policy.actor, policy.actor_opt, agrad, policy.learning_rate);

    const double tau = policy.polyak;
    for (std::size_t l = 0; l < policy.actor.w.size(); ++l) {
        policy.actor_target.w[l] = (1.0 - tau) * policy.actor_target.w[l] + tau * policy.actor.w[l];
        policy.actor_target.b[l] = (1.0 - tau) * policy.actor_target.b[l] + tau * policy.actor.b[l];
    }
    for (std::size_t l = 0; l < policy.critic.w.size(); ++l) {
        policy.critic_target.w[l] =
            (1.0 - tau) * policy.critic_target.w[l] + tau * policy.critic.w[l];
        policy.critic_target.b[l] =
            (1.0 - tau) * policy.critic_target.b[l] + tau * policy.critic.b[l];
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

nlohmann::json mlp_to_json(const Mlp& net) {
    nlohmann::json j;
    nlohmann::json ws = nlohmann::json::array();
    nlohmann::json bs = nlohmann::json::array();
    for (std::size_t l = 0; l < net.w.size(); ++l) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < net.w[l].rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index jj = 0; jj < net.w[l].cols(); ++jj) row.push_back(net.w[l](i, jj));
            rows.push_back(std::move(row));
        }
        ws.push_back(std::move(rows));
        bs.push_back(vec_to_json(net.b[l]));
    }
    j["w"] = std::move(ws);
    j["b"] = std::move(bs);
    return j;
}

Mlp mlp_from_json(const nlohmann::json& j, const char* what) {
    if (!j.contains("w") || !j.contains("b"))
        throw std::runtime_error(std::string("policy JSON: missing field 'w'/'b' in ") + what);
    Mlp net;
    const auto& ws = j["w"];
    const auto& bs = j["b"];
    if (!ws.is_array() || !bs.is_array() || ws.size() != bs.size())
        throw std::runtime_error(std::string("policy JSON: malformed layers in ") + what);
    for (std::size_t l = 0; l < ws.size(); ++l) {
        const auto& rows = ws[l];
        if (!rows.is_array() || rows.empty())
            throw std::runtime_error(std::string("policy JSON: malformed weight matrix in ") +
                                     what);
        const std::size_t r = rows.size();
        const std::size_t c = rows[0].size();
        Mat w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        for (std::size_t i = 0; i < r; ++i) {
            if (rows[i].size() != c)
                throw std::runtime_error(std::string("policy JSON: ragged weight matrix in ") +
                                         what);
            for (std::size_t jj = 0; jj < c; ++jj)
                w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj)) = rows[i][jj];
        }
        net.w.push_back(std::move(w));
        net.b.push_back(vec_from_json(bs[l], what));
    }
    return net;
}

}  // namespace

void save_policy(const PolicyParams& policy, const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["state_dim"] = policy.state_dim;
    j["action_dim"] = policy.action_dim;
    j["hidden"] = policy.hidden;
    j["action_box"] = {{"lo", vec_to_json(policy.action_box.lo)},
                       {"hi", vec_to_json(policy.action_box.hi)}};
    j["exploration_sigma"] = policy.exploration_sigma;
    j["learning_rate"] = policy.learning_rate;
    j["discount_gamma"] = policy.discount_gamma;
    j["polyak"] = policy.polyak;
    j["env"] = {{"name", policy.env_name}, {"noise_sigma", policy.env_noise_sigma}};
    j["actor"] = mlp_to_json(policy.actor);
    j["critic"] = mlp_to_json(policy.critic);
    j["actor_target"] = mlp_to_json(policy.actor_target);
    j["critic_target"] = mlp_to_json(policy.critic_target);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_policy: cannot open " + path);
    out << j.dump(2) << "\n";
}

PolicyParams load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_policy: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("policy JSON: parse error: ") + e.what());
    }

    auto need = [&](const char* name) -> const nlohmann::json& {
        if (!j.contains(name))
            throw std::runtime_error(std::string("policy JSON: missing field '") + name + "'");
        return j[name];
    };

    PolicyParams p;
    p.state_dim = need("state_dim").get<int>();
    p.action_dim = need("action_dim").get<int>();
    p.hidden = need("hidden").get<std::vector<int>>();
    const auto& box = need("action_box");
    p.action_box.lo = vec_from_json(box.at("lo"), "field 'action_box.lo'");
    p.action_box.hi = vec_from_json(box.at("hi"), "field 'action_box.hi'");
    p.exploration_sigma = need("exploration_sigma").get<double>();
    p.learning_rate = need("learning_rate").get<double>();
    p.discount_gamma = need("discount_gamma").get<double>();
    p.polyak = need("polyak").get<double>();
    if (j.contains("env")) {
        p.env_name = j["env"].value("name", std::string());
        p.env_noise_sigma = j["env"].value("noise_sigma", 0.0);
    }
    p.actor = mlp_from_json(need("actor"), "actor");
    p.critic = mlp_from_json(need("critic"), "critic");
    p.actor_target = mlp_from_json(need("actor_target"), "actor_target");
    p.critic_target = mlp_from_json(need("critic_target"), "critic_target");
    p.actor_opt = make_adam(p.actor);
    p.critic_opt = make_adam(p.critic);
    return p;
}

}  // namespace kbse
