#pragma once

// Baseline agents and the train/evaluate loop.
//
// Neural agents score each choice independently with one shared network, so
// the output length always equals the number of choices. With a hint present
// the per-choice input is [h_i, h_hint, h_i * h_hint]; the elementwise block
// lets even a linear model reward choices that agree with the hint.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "scriptworld/engine.hpp"
#include "scriptworld/features.hpp"
#include "scriptworld/nn.hpp"

namespace scriptworld {

enum class AgentKind { Random, Oracle, TabularQ, Dqn, Reinforce };

inline std::string_view to_string(AgentKind k) {
    switch (k) {
    case AgentKind::Random: return "random";
    case AgentKind::Oracle: return "oracle";
    case AgentKind::TabularQ: return "tabq";
    case AgentKind::Dqn: return "dqn";
    case AgentKind::Reinforce: return "reinforce";
    }
    return "?";
}

inline AgentKind agent_kind_from_string(std::string_view s) {
    for (auto k : {AgentKind::Random, AgentKind::Oracle, AgentKind::TabularQ, AgentKind::Dqn, AgentKind::Reinforce})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown agent '" + std::string(s) + "'");
}

struct AgentConfig {
    double gamma = 0.99;
    double epsilon_start = 1.0;
    double epsilon_end = 0.01;
    std::uint64_t epsilon_decay_steps = 3000;
    double learning_rate = 0.1;
    std::size_t replay_capacity = 10'000;
    std::size_t batch_size = 16;
    std::uint64_t target_sync_interval = 100;
    /// Empty means a linear model.
    std::vector<std::size_t> hidden_sizes;
    std::uint64_t seed = 0;
    std::size_t feature_dim = 128;
    bool use_hint = true;
    std::size_t window = 100;
    std::size_t eval_episodes = 100;
};

/// Per-kind defaults; only the learning rate differs.
inline AgentConfig default_agent_config(AgentKind kind) {
    AgentConfig cfg;
    if (kind == AgentKind::TabularQ) cfg.learning_rate = 0.5;
    if (kind == AgentKind::Reinforce) cfg.learning_rate = 0.05;
    return cfg;
}

inline void validate(const AgentConfig& cfg) {
    if (!(cfg.gamma >= 0 && cfg.gamma <= 1)) throw ConfigError("gamma must lie in [0, 1]");
    if (!(cfg.learning_rate > 0) || !std::isfinite(cfg.learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (cfg.epsilon_start < 0 || cfg.epsilon_start > 1 || cfg.epsilon_end < 0 || cfg.epsilon_end > 1)
        throw ConfigError("epsilon bounds must lie in [0, 1]");
    if (cfg.batch_size == 0 || cfg.replay_capacity < cfg.batch_size)
        throw ConfigError("need 0 < batch_size <= replay_capacity");
    if (cfg.target_sync_interval == 0) throw ConfigError("target_sync_interval must be positive");
    if (cfg.window == 0) throw ConfigError("window must be positive");
    if (cfg.feature_dim == 0) throw ConfigError("feature_dim must be positive");
}

inline json to_json(const AgentConfig& c) {
    return {{"gamma", c.gamma},
            {"epsilon_start", c.epsilon_start},
            {"epsilon_end", c.epsilon_end},
            {"epsilon_decay_steps", c.epsilon_decay_steps},
            {"learning_rate", c.learning_rate},
            {"replay_capacity", c.replay_capacity},
            {"batch_size", c.batch_size},
            {"target_sync_interval", c.target_sync_interval},
            {"hidden_sizes", c.hidden_sizes},
            {"seed", c.seed},
            {"feature_dim", c.feature_dim},
            {"use_hint", c.use_hint},
            {"window", c.window},
            {"eval_episodes", c.eval_episodes}};
}

/// Linear decay from start to end over decay_steps, then flat.
inline double epsilon_at(const AgentConfig& cfg, std::uint64_t step) {
    if (cfg.epsilon_decay_steps == 0 || step >= cfg.epsilon_decay_steps) return cfg.epsilon_end;
    const double frac = static_cast<double>(step) / static_cast<double>(cfg.epsilon_decay_steps);
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

// ---------------------------------------------------------------------------
// action selection

inline std::size_t act_random(const Observation& obs, Rng& rng) {
    return obs.choices.size() <= 1 ? 0 : rng.index(obs.choices.size());
}

inline std::size_t act_oracle(const Observation& obs) {
    if (!obs.correct_index) throw OracleUnavailable("observation carries no correct index");
    return *obs.correct_index;
}

/// First maximum wins.
inline std::size_t argmax(const Vector& q) {
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < q.size(); ++i)
        if (q[i] > q[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
    return best;
}

/// One bernoulli draw, plus one index draw only when exploring.
inline std::size_t epsilon_greedy(const Vector& q, double epsilon, Rng& rng) {
    if (q.size() == 0) throw ShapeMismatch("no choices to act on");
    if (rng.bernoulli(epsilon)) return rng.index(static_cast<std::size_t>(q.size()));
    return argmax(q);
}

// ---------------------------------------------------------------------------
// per-choice scoring network

class QNet {
public:
    QNet() = default;

    QNet(std::size_t feature_dim, bool hint_inputs, const std::vector<std::size_t>& hidden, Rng& rng)
        : dim_(feature_dim), hint_inputs_(hint_inputs), mlp_(hint_inputs ? 3 * feature_dim : feature_dim, hidden, rng) {}

    std::size_t feature_dim() const noexcept { return dim_; }
    bool hint_inputs() const noexcept { return hint_inputs_; }
    nn::Mlp& mlp() noexcept { return mlp_; }
    const nn::Mlp& mlp() const noexcept { return mlp_; }

    /// Missing hints contribute zero blocks.
    Vector choice_input(const FeatureVector& f, std::size_t i) const {
        check(f);
        if (!hint_inputs_) return f.block(i);
        const auto d = static_cast<Eigen::Index>(dim_);
        Vector x = Vector::Zero(3 * d);
        x.head(d) = f.block(i);
        if (f.hint_included) {
            x.segment(d, d) = f.hint();
            x.tail(d) = f.block(i).cwiseProduct(f.hint());
        }
        return x;
    }

    Vector q_values(const FeatureVector& f) const {
        Vector q(static_cast<Eigen::Index>(f.num_choices));
        for (std::size_t i = 0; i < f.num_choices; ++i) q[static_cast<Eigen::Index>(i)] = mlp_.forward(choice_input(f, i));
        return q;
    }

private:
    void check(const FeatureVector& f) const {
        if (f.dim != dim_ || static_cast<std::size_t>(f.values.size()) != f.expected_size())
            throw ShapeMismatch("feature layout (dim " + std::to_string(f.dim) + ") does not match network dim " +
                                std::to_string(dim_));
    }

    std::size_t dim_ = 0;
    bool hint_inputs_ = false;
    nn::Mlp mlp_;
};

inline std::size_t act_epsilon_greedy(const QNet& net, const FeatureVector& f, double epsilon, Rng& rng) {
    return epsilon_greedy(net.q_values(f), epsilon, rng);
}

// ---------------------------------------------------------------------------
// DQN

struct Transition {
    FeatureVector state;
    std::size_t action = 0;
    double reward = 0;
    /// Unused when done.
    FeatureVector next;
    bool done = false;
};

inline double td_target(const QNet& target_net, const Transition& t, double gamma) {
    if (t.done) return t.reward;
    return t.reward + gamma * target_net.q_values(t.next).maxCoeff();
}

/// Mean squared TD error against fixed targets; adds its gradient into grad
/// when given.
inline double dqn_loss(const QNet& net, const std::vector<Transition>& batch, const std::vector<double>& targets,
                       nn::Params* grad = nullptr) {
    if (batch.empty()) throw ShapeMismatch("empty batch");
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0;
    nn::Tape tape;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto& t = batch[k];
        if (t.action >= t.state.num_choices) throw ShapeMismatch("action index outside the choice set");
        const double q = net.mlp().forward(net.choice_input(t.state, t.action), tape);
        const double err = q - targets[k];
        loss += scale * err * err;
        if (grad) net.mlp().backward(tape, 2.0 * scale * err, *grad);
    }
    return loss;
}

/// One SGD step on the TD loss; returns the loss before the step.
inline double dqn_update(QNet& net, const QNet& target_net, const std::vector<Transition>& batch,
                         const AgentConfig& cfg) {
    std::vector<double> targets;
    targets.reserve(batch.size());
    for (const auto& t : batch) targets.push_back(td_target(target_net, t, cfg.gamma));
    nn::Params grad = net.mlp().params().zeros_like();
    const double loss = dqn_loss(net, batch, targets, &grad);
    if (!std::isfinite(loss) || !grad.all_finite())
        throw NonFiniteLoss("DQN loss " + std::to_string(loss) + " over a batch of " + std::to_string(batch.size()));
    net.mlp().params().axpy(-cfg.learning_rate, grad);
    return loss;
}

/// Fixed-capacity ring buffer with uniform sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 10'000) : capacity_(capacity) {}

    void push(Transition t) {
        if (items_.size() < capacity_) items_.push_back(std::move(t));
        else items_[next_] = std::move(t);
        next_ = (next_ + 1) % capacity_;
    }

    std::size_t size() const noexcept { return items_.size(); }

    std::vector<Transition> sample(std::size_t n, Rng& rng) const {
        std::vector<Transition> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(items_[rng.index(items_.size())]);
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> items_;
};

// ---------------------------------------------------------------------------
// REINFORCE

struct PolicyStep {
    FeatureVector state;
    std::size_t action = 0;
    double reward = 0;
};

inline std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
    std::vector<double> g(rewards.size());
    double acc = 0;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        acc = rewards[t] + gamma * acc;
        g[t] = acc;
    }
    return g;
}

inline Vector softmax(const Vector& logits) {
    const Vector e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
}

/// -sum_t log pi(a_t|s_t) * (G_t - b); adds its gradient into grad when given.
inline double reinforce_loss(const QNet& policy, const std::vector<PolicyStep>& episode,
                             const std::vector<double>& returns, double baseline, nn::Params* grad = nullptr) {
    double loss = 0;
    std::vector<nn::Tape> tapes;
    for (std::size_t t = 0; t < episode.size(); ++t) {
        const auto& step = episode[t];
        const std::size_t n = step.state.num_choices;
        if (step.action >= n) throw ShapeMismatch("action index outside the choice set");
        Vector logits(static_cast<Eigen::Index>(n));
        tapes.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            logits[static_cast<Eigen::Index>(i)] = policy.mlp().forward(policy.choice_input(step.state, i), tapes[i]);
        const double shifted = logits.maxCoeff();
        const double log_z = shifted + std::log((logits.array() - shifted).exp().sum());
        const double advantage = returns[t] - baseline;
        loss -= (logits[static_cast<Eigen::Index>(step.action)] - log_z) * advantage;
        if (!grad) continue;
        const Vector p = softmax(logits);
        for (std::size_t i = 0; i < n; ++i) {
            const double dlogit = (p[static_cast<Eigen::Index>(i)] - (i == step.action ? 1.0 : 0.0)) * advantage;
            policy.mlp().backward(tapes[i], dlogit, *grad);
        }
    }
    return loss;
}

/// Running mean of every return seen so far.
struct RunningMean {
    double mean = 0;
    std::uint64_t count = 0;

    void add(double x) {
        ++count;
        mean += (x - mean) / static_cast<double>(count);
    }
};

/// One SGD step on the episode, then folds its returns into the baseline.
inline double reinforce_update(QNet& policy, const std::vector<PolicyStep>& episode, const AgentConfig& cfg,
                               RunningMean& baseline) {
    if (episode.empty()) return 0;
    std::vector<double> rewards;
    for (const auto& s : episode) rewards.push_back(s.reward);
    const auto returns = discounted_returns(rewards, cfg.gamma);
    nn::Params grad = policy.mlp().params().zeros_like();
    const double loss = reinforce_loss(policy, episode, returns, baseline.mean, &grad);
    if (!std::isfinite(loss) || !grad.all_finite())
        throw NonFiniteLoss("REINFORCE loss " + std::to_string(loss) + " over " + std::to_string(episode.size()) +
                            " steps");
    policy.mlp().params().axpy(-cfg.learning_rate, grad);
    for (double g : returns) baseline.add(g);
    return loss;
}

// ---------------------------------------------------------------------------
// tabular Q

/// Q(s, a) keyed by state name and normalized choice text. Unseen pairs are 0.
class TabularQ {
public:
    double value(const std::string& state, const std::string& action) const {
        auto s = table_.find(state);
        if (s == table_.end()) return 0;
        auto a = s->second.find(text::normalize(action));
        return a == s->second.end() ? 0 : a->second;
    }

    /// Max over recorded entries; 0 for a state never updated.
    double max_value(const std::string& state) const {
        auto s = table_.find(state);
        if (s == table_.end() || s->second.empty()) return 0;
        double best = s->second.begin()->second;
        for (const auto& [_, v] : s->second) best = std::max(best, v);
        return best;
    }

    double& entry(const std::string& state, const std::string& action) {
        return table_[state][text::normalize(action)];
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& [_, row] : table_) n += row.size();
        return n;
    }

private:
    std::map<std::string, std::map<std::string, double>> table_;
};

/// Q(s,a) += alpha * (r + gamma * max Q(s',.) - Q(s,a)); no bootstrap when
/// next_key is empty (terminal).
inline double tabular_q_update(TabularQ& table, const std::string& state_key, const std::string& action, double reward,
                               const std::optional<std::string>& next_key, const AgentConfig& cfg) {
    const double bootstrap = next_key ? cfg.gamma * table.max_value(*next_key) : 0.0;
    double& q = table.entry(state_key, action);
    q += cfg.learning_rate * (reward + bootstrap - q);
    return q;
}

// ---------------------------------------------------------------------------
// agents

/// act() is const so frozen agents can be evaluated from several threads.
class Agent {
public:
    virtual ~Agent() = default;
    virtual AgentKind kind() const = 0;
    virtual std::size_t act(const Environment& env, const Observation& obs, Rng& rng, bool explore) const = 0;
    virtual void observe(const Environment&, const Observation& /*obs*/, std::size_t /*action*/, int /*reward*/,
                         const Observation* /*next*/, bool /*done*/) {}
    virtual void end_episode() {}
};

class RandomAgent final : public Agent {
public:
    AgentKind kind() const override { return AgentKind::Random; }
    std::size_t act(const Environment&, const Observation& obs, Rng& rng, bool) const override {
        return act_random(obs, rng);
    }
};

class OracleAgent final : public Agent {
public:
    AgentKind kind() const override { return AgentKind::Oracle; }
    std::size_t act(const Environment&, const Observation& obs, Rng&, bool) const override { return act_oracle(obs); }
};

/// White-box: the state key is the engine's node name.
class TabularQAgent final : public Agent {
public:
    explicit TabularQAgent(AgentConfig cfg) : cfg_(std::move(cfg)) { validate(cfg_); }

    AgentKind kind() const override { return AgentKind::TabularQ; }
    const TabularQ& table() const noexcept { return table_; }

    std::size_t act(const Environment& env, const Observation& obs, Rng& rng, bool explore) const override {
        const std::string s = state_key(env, obs);
        Vector q(static_cast<Eigen::Index>(obs.choices.size()));
        for (std::size_t i = 0; i < obs.choices.size(); ++i) q[static_cast<Eigen::Index>(i)] = table_.value(s, obs.choices[i]);
        return epsilon_greedy(q, explore ? epsilon_at(cfg_, steps_) : 0.0, rng);
    }

    void observe(const Environment& env, const Observation& obs, std::size_t action, int reward,
                 const Observation* next, bool done) override {
        std::optional<std::string> next_key;
        if (!done && next) next_key = state_key(env, *next);
        tabular_q_update(table_, state_key(env, obs), obs.choices.at(action), reward, next_key, cfg_);
        ++steps_;
    }

private:
    static std::string state_key(const Environment& env, const Observation& obs) {
        if (!obs.node) throw OracleUnavailable("tabular Q needs the engine's node id (white-box observations)");
        return env.graph().dag.name(*obs.node);
    }

    AgentConfig cfg_;
    TabularQ table_;
    std::uint64_t steps_ = 0;
};

/// Shared featurizer plumbing for the network agents.
class NetworkAgent : public Agent {
public:
    NetworkAgent(AgentConfig cfg, std::shared_ptr<const EmbeddingTable> table)
        : cfg_(std::move(cfg)), table_(std::move(table)),
          featurizer_(HashFeaturizer(table_ ? table_->dim : cfg_.feature_dim), table_.get(), cfg_.use_hint),
          rng_(mix_seed(cfg_.seed, 0xA6E)) {
        validate(cfg_);
        net_ = QNet(featurizer_.dim(), cfg_.use_hint, cfg_.hidden_sizes, rng_);
    }

    const QNet& net() const noexcept { return net_; }
    const Featurizer& featurizer() const noexcept { return featurizer_; }
    const AgentConfig& config() const noexcept { return cfg_; }

protected:
    AgentConfig cfg_;
    std::shared_ptr<const EmbeddingTable> table_;
    Featurizer featurizer_;
    Rng rng_;
    QNet net_;
};

class DqnAgent final : public NetworkAgent {
public:
    explicit DqnAgent(AgentConfig cfg, std::shared_ptr<const EmbeddingTable> table = nullptr)
        : NetworkAgent(std::move(cfg), std::move(table)), target_(net_), replay_(cfg_.replay_capacity) {}

    AgentKind kind() const override { return AgentKind::Dqn; }
    double last_loss() const noexcept { return last_loss_; }

    std::size_t act(const Environment&, const Observation& obs, Rng& rng, bool explore) const override {
        return act_epsilon_greedy(net_, featurizer_(obs), explore ? epsilon_at(cfg_, steps_) : 0.0, rng);
    }

    void observe(const Environment&, const Observation& obs, std::size_t action, int reward, const Observation* next,
                 bool done) override {
        Transition t{featurizer_(obs), action, static_cast<double>(reward), {}, done || !next};
        if (!t.done) t.next = featurizer_(*next);
        replay_.push(std::move(t));
        ++steps_;
        if (replay_.size() < cfg_.batch_size) return;
        last_loss_ = dqn_update(net_, target_, replay_.sample(cfg_.batch_size, rng_), cfg_);
        if (++updates_ % cfg_.target_sync_interval == 0) target_ = net_;
    }

private:
    QNet target_;
    ReplayBuffer replay_;
    std::uint64_t steps_ = 0;
    std::uint64_t updates_ = 0;
    double last_loss_ = 0;
};

class ReinforceAgent final : public NetworkAgent {
public:
    explicit ReinforceAgent(AgentConfig cfg, std::shared_ptr<const EmbeddingTable> table = nullptr)
        : NetworkAgent(std::move(cfg), std::move(table)) {}

    AgentKind kind() const override { return AgentKind::Reinforce; }
    double baseline() const noexcept { return baseline_.mean; }

    /// Samples from the softmax while training, argmax when frozen.
    std::size_t act(const Environment&, const Observation& obs, Rng& rng, bool explore) const override {
        const Vector q = net_.q_values(featurizer_(obs));
        if (!explore) return argmax(q);
        const Vector p = softmax(q);
        double u = rng.uniform();
        for (Eigen::Index i = 0; i + 1 < p.size(); ++i) {
            if (u < p[i]) return static_cast<std::size_t>(i);
            u -= p[i];
        }
        return static_cast<std::size_t>(p.size() - 1);
    }

    void observe(const Environment&, const Observation& obs, std::size_t action, int reward, const Observation*,
                 bool) override {
        episode_.push_back({featurizer_(obs), action, static_cast<double>(reward)});
    }

    void end_episode() override {
        reinforce_update(net_, episode_, cfg_, baseline_);
        episode_.clear();
    }

private:
    std::vector<PolicyStep> episode_;
    RunningMean baseline_;
};

inline std::unique_ptr<Agent> make_agent(AgentKind kind, const AgentConfig& cfg,
                                         std::shared_ptr<const EmbeddingTable> table = nullptr) {
    switch (kind) {
    case AgentKind::Random: return std::make_unique<RandomAgent>();
    case AgentKind::Oracle: return std::make_unique<OracleAgent>();
    case AgentKind::TabularQ: return std::make_unique<TabularQAgent>(cfg);
    case AgentKind::Dqn: return std::make_unique<DqnAgent>(cfg, std::move(table));
    case AgentKind::Reinforce: return std::make_unique<ReinforceAgent>(cfg, std::move(table));
    }
    throw ConfigError("unknown agent kind");
}

// ---------------------------------------------------------------------------
// episodes, training, evaluation

/// Plays one game to the end; learns only when `learn` is set.
inline GameState run_episode(Agent& agent, const Environment& env, std::uint64_t game_seed, Rng& rng, bool learn) {
    auto [st, obs] = env.new_game(game_seed);
    while (!st.done) {
        const Observation current = st.last_observation;
        const std::size_t a = agent.act(env, current, rng, learn);
        const StepResult res = env.step(st, a);
        if (learn)
            agent.observe(env, current, a, res.reward, res.next_observation ? &*res.next_observation : nullptr, res.done);
    }
    if (learn) agent.end_episode();
    return std::move(st);
}

inline std::uint64_t train_game_seed(std::uint64_t seed, std::uint64_t episode) { return mix_seed(seed, 2 * episode); }
inline std::uint64_t train_agent_seed(std::uint64_t seed, std::uint64_t episode) { return mix_seed(seed, 2 * episode + 1); }
inline std::uint64_t eval_seed(std::uint64_t seed) { return mix_seed(seed, 0xE7A1'0000'0000ull); }

/// Frozen-policy scores; episode i uses seeds derived from (seed, i) only,
/// so the result does not depend on the worker count.
inline std::vector<int> evaluate(const Agent& agent, const Environment& env, std::size_t episodes, std::uint64_t seed,
                                 std::size_t workers = 1) {
    std::vector<int> scores(episodes);
    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Rng rng(mix_seed(seed, 2 * i + 1));
            auto [st, obs] = env.new_game(mix_seed(seed, 2 * i));
            while (!st.done) env.step(st, agent.act(env, st.last_observation, rng, false));
            scores[i] = st.cumulative_reward;
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, episodes));
    if (workers == 1) {
        run_range(0, episodes);
        return scores;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (episodes + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                run_range(w * chunk, std::min(episodes, (w + 1) * chunk));
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return scores;
}

struct MeanSd {
    double mean = 0;
    double sd = 0;
};

inline MeanSd mean_sd(const std::vector<int>& xs) {
    MeanSd out;
    if (xs.empty()) return out;
    for (int x : xs) out.mean += x;
    out.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        for (int x : xs) out.sd += (x - out.mean) * (x - out.mean);
        out.sd = std::sqrt(out.sd / static_cast<double>(xs.size() - 1));
    }
    return out;
}

struct TrainReport {
    std::string agent;
    std::string scenario;
    std::size_t window = 100;
    std::vector<int> scores;
    /// Mean over the trailing window ending at each episode.
    std::vector<double> moving_avg;
    /// Cumulative share of scenario-graph nodes visited, in percent.
    std::vector<double> coverage;
    double wall_seconds = 0;
    MeanSd eval;
    json stamp;

    double last_mean(std::size_t n) const {
        n = std::min(n, scores.size());
        if (n == 0) return 0;
        return std::accumulate(scores.end() - static_cast<std::ptrdiff_t>(n), scores.end(), 0.0) / static_cast<double>(n);
    }
};

inline std::vector<double> moving_average(const std::vector<int>& xs, std::size_t window) {
    std::vector<double> out;
    out.reserve(xs.size());
    double sum = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sum += xs[i];
        if (i >= window) sum -= xs[i - window];
        out.push_back(sum / static_cast<double>(std::min(i + 1, window)));
    }
    return out;
}

inline TrainReport train(Agent& agent, const Environment& env, const AgentConfig& cfg, std::size_t episodes,
                         std::size_t workers = 1) {
    validate(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    TrainReport rep;
    rep.agent = std::string(to_string(agent.kind()));
    rep.scenario = env.assets().scenario.title;
    rep.window = cfg.window;
    std::vector<bool> seen(env.graph().size(), false);
    std::size_t seen_count = 0;
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        Rng rng(train_agent_seed(cfg.seed, ep));
        const GameState st = run_episode(agent, env, train_game_seed(cfg.seed, ep), rng, true);
        rep.scores.push_back(st.cumulative_reward);
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (st.visited[i] && !seen[i]) {
                seen[i] = true;
                ++seen_count;
            }
        rep.coverage.push_back(100.0 * static_cast<double>(seen_count) / static_cast<double>(seen.size()));
    }
    rep.moving_avg = moving_average(rep.scores, cfg.window);
    rep.eval = mean_sd(evaluate(agent, env, cfg.eval_episodes, eval_seed(cfg.seed), workers));
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.stamp = {{"engine_version", std::string(kEngineVersion)},
                 {"agent", rep.agent},
                 {"scenario", rep.scenario},
                 {"episodes", episodes},
                 {"game_config", to_json(env.config())},
                 {"agent_config", to_json(cfg)}};
    return rep;
}

inline TrainReport train(AgentKind kind, const Environment& env, const AgentConfig& cfg, std::size_t episodes,
                         std::shared_ptr<const EmbeddingTable> table = nullptr, std::size_t workers = 1) {
    auto agent = make_agent(kind, cfg, std::move(table));
    return train(*agent, env, cfg, episodes, workers);
}

/// episode,score,moving_avg,coverage_pct
inline std::string report_csv(const TrainReport& rep) {
    std::ostringstream out;
    out << "episode,score,moving_avg,coverage_pct\n";
    out.precision(17);
    for (std::size_t i = 0; i < rep.scores.size(); ++i)
        out << i << ',' << rep.scores[i] << ',' << rep.moving_avg[i] << ',' << rep.coverage[i] << '\n';
    return out.str();
}

/// Summary without wall time, so it is reproducible byte for byte.
inline json report_summary(const TrainReport& rep) {
    return {{"stamp", rep.stamp},
            {"episodes", rep.scores.size()},
            {"window", rep.window},
            {"last_window_mean", rep.last_mean(rep.window)},
            {"final_coverage_pct", rep.coverage.empty() ? 0.0 : rep.coverage.back()},
            {"eval_mean", rep.eval.mean},
            {"eval_sd", rep.eval.sd}};
}

struct ScoreMatrix {
    std::vector<std::string> titles;
    /// values[i][j]: trained on i, evaluated on j.
    std::vector<std::vector<double>> values;
};

/// agents[i] was trained on envs[i]; every agent is evaluated on every env.
inline ScoreMatrix cross_eval(const std::vector<const Agent*>& agents, const std::vector<const Environment*>& envs,
                              std::size_t episodes = 100, std::uint64_t seed = 0, std::size_t workers = 1) {
    if (agents.size() != envs.size()) throw ConfigError("need one trained agent per scenario");
    for (const auto* env : envs) {
        const auto& a = env->config();
        const auto& b = envs.front()->config();
        if (a.num_choices != b.num_choices || a.handicap != b.handicap)
            throw FeatureDimMismatch("scenarios disagree on num_choices or hint mode, so feature layouts differ");
    }
    ScoreMatrix m;
    for (const auto* env : envs) m.titles.push_back(env->assets().scenario.title);
    m.values.assign(envs.size(), std::vector<double>(envs.size()));
    for (std::size_t i = 0; i < agents.size(); ++i)
        for (std::size_t j = 0; j < envs.size(); ++j)
            m.values[i][j] = mean_sd(evaluate(*agents[i], *envs[j], episodes, seed, workers)).mean;
    return m;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Row header "train\eval", then one column per evaluation scenario.
inline std::string to_csv(const ScoreMatrix& m) {
    std::ostringstream out;
    out.precision(6);
    out << "train\\eval";
    for (const auto& t : m.titles) out << ',' << csv_field(t);
    out << '\n';
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        out << csv_field(m.titles[i]);
        for (double v : m.values[i]) out << ',' << v;
        out << '\n';
    }
    return out.str();
}

} // namespace scriptworld
