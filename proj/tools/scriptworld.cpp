// scriptworld: play, train, evaluate, inspect and serve text-game scenarios.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scriptworld/scriptworld.hpp"

namespace fs = std::filesystem;
namespace sw = scriptworld;
using nlohmann::json;

namespace {

/// Bad flag combinations discovered after parsing; exits with code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScenarioFlags {
    std::string scenario;
    bool builtin = false;
    std::string hints;
};

struct GameFlags {
    int choices = 2;
    bool handicap = false;
    int back_hop = 1;
    std::optional<int> neg_distance;
    std::uint64_t seed = 0;
    std::string distance_space = "scenario-graph";
    std::uint64_t max_steps = 10'000;

    sw::GameConfig config() const {
        sw::GameConfig c;
        c.num_choices = choices;
        c.handicap = handicap;
        c.back_hop = back_hop;
        c.neg_distance = neg_distance;
        c.seed = seed;
        c.distance_space = sw::distance_space_from_string(distance_space);
        c.max_steps = max_steps;
        return c;
    }
};

struct AgentFlags {
    std::string agent = "tabq";
    std::optional<double> lr;
    double gamma = 0.99;
    std::uint64_t epsilon_decay = 3000;
    double epsilon_end = 0.01;
    std::vector<std::size_t> hidden;
    std::size_t feature_dim = 128;
    bool no_hint_features = false;
    std::size_t window = 100;
    std::size_t eval_episodes = 100;
    std::string embeddings;

    sw::AgentConfig config(std::uint64_t seed) const {
        sw::AgentConfig c = sw::default_agent_config(sw::agent_kind_from_string(agent));
        if (lr) c.learning_rate = *lr;
        c.gamma = gamma;
        c.epsilon_decay_steps = epsilon_decay;
        c.epsilon_end = epsilon_end;
        c.hidden_sizes = hidden;
        c.feature_dim = feature_dim;
        c.use_hint = !no_hint_features;
        c.window = window;
        c.eval_episodes = eval_episodes;
        c.seed = seed;
        return c;
    }

    std::shared_ptr<const sw::EmbeddingTable> table() const {
        if (embeddings.empty()) return nullptr;
        return std::make_shared<const sw::EmbeddingTable>(sw::load_embeddings(embeddings));
    }
};

void add_scenario_flags(CLI::App* cmd, ScenarioFlags& f) {
    auto* builtin = cmd->add_flag("--builtin", f.builtin, "Use the bundled 'Get Medicine' scenario");
    cmd->add_option("--scenario", f.scenario, "Scenario JSON file")->excludes(builtin);
    cmd->add_option("--hints", f.hints, "Hint JSONL file (the builtin scenario ships its own)");
}

void add_game_flags(CLI::App* cmd, GameFlags& f) {
    cmd->add_option("--choices", f.choices, "Choices offered per turn")->capture_default_str();
    cmd->add_flag("--handicap", f.handicap, "Show a hint with every observation");
    cmd->add_option("--back-hop", f.back_hop, "Hops back after a wrong pick")->capture_default_str();
    cmd->add_option("--neg-distance", f.neg_distance, "Minimum hop distance of wrong choices (default: scenario's)");
    cmd->add_option("--seed", f.seed, "Random seed")->capture_default_str();
    cmd->add_option("--distance-space", f.distance_space, "Graph used for negative distances")
        ->check(CLI::IsMember({"scenario-graph", "compact-graph"}))
        ->capture_default_str();
    cmd->add_option("--max-steps", f.max_steps, "Step cap per game")->capture_default_str();
}

void add_agent_flags(CLI::App* cmd, AgentFlags& f, std::vector<std::string> kinds) {
    cmd->add_option("--agent", f.agent, "Agent kind")->check(CLI::IsMember(kinds))->capture_default_str();
    cmd->add_option("--lr", f.lr, "Learning rate (default depends on the agent)");
    cmd->add_option("--gamma", f.gamma, "Discount factor")->capture_default_str();
    cmd->add_option("--epsilon-decay", f.epsilon_decay, "Steps of linear epsilon decay")->capture_default_str();
    cmd->add_option("--epsilon-end", f.epsilon_end, "Final exploration rate")->capture_default_str();
    cmd->add_option("--hidden", f.hidden, "Hidden layer widths (none: linear)");
    cmd->add_option("--feature-dim", f.feature_dim, "Hashed feature size")->capture_default_str();
    cmd->add_flag("--no-hint-features", f.no_hint_features, "Do not feed the hint to network agents");
    cmd->add_option("--window", f.window, "Moving-average window")->capture_default_str();
    cmd->add_option("--eval-episodes", f.eval_episodes, "Frozen-policy evaluation episodes")->capture_default_str();
    cmd->add_option("--embeddings", f.embeddings, "Embedding JSONL (hashed features otherwise)");
}

std::shared_ptr<const sw::GameAssets> load_assets(const ScenarioFlags& f) {
    if (!f.builtin && f.scenario.empty()) throw UsageError("one of --builtin or --scenario PATH is required");
    sw::Scenario s = f.builtin ? sw::builtin_scenario() : sw::load_scenario(f.scenario);
    std::optional<sw::HintStore> hints;
    if (!f.hints.empty()) hints = sw::load_hints(f.hints, s);
    else if (f.builtin) hints = sw::builtin_hints();
    return sw::make_assets(std::move(s), std::move(hints));
}

void write_file(const fs::path& path, const std::string& body) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << body)) throw sw::Error("cannot write '" + path.string() + "'");
}

// ---------------------------------------------------------------------------

int cmd_play(const ScenarioFlags& sf, const GameFlags& gf, const std::string& transcript) {
    const sw::Environment env(load_assets(sf), gf.config());
    auto [st, obs] = env.new_game();
    std::cout << "quest: " << obs.quest << "\n";
    while (!st.done) {
        const auto& o = st.last_observation;
        std::cout << "\n";
        if (o.hint) std::cout << "hint: " << *o.hint << "\n";
        for (std::size_t i = 0; i < o.choices.size(); ++i) std::cout << "  " << i + 1 << ") " << o.choices[i] << "\n";
        std::size_t pick = 0;
        for (;;) {
            std::cout << "> " << std::flush;
            std::string line;
            if (!std::getline(std::cin, line)) {
                std::cout << "\ninput closed\n";
                return 1;
            }
            std::istringstream in(sw::text::trim(line));
            long long n = 0;
            if (in >> n && in.eof() && n >= 1 && n <= static_cast<long long>(o.choices.size())) {
                pick = static_cast<std::size_t>(n - 1);
                break;
            }
            std::cout << "enter a number from 1 to " << o.choices.size() << "\n";
        }
        const auto res = env.step(st, pick);
        std::cout << (res.reward >= 0 && pick == *o.correct_index ? "correct" : "wrong") << "  reward: " << res.reward
                  << "  running score: " << st.cumulative_reward << "\n";
    }
    std::cout << "\ngame over: " << sw::to_string(st.reason) << "\n";
    if (!transcript.empty()) write_file(transcript, sw::to_jsonl(sw::transcript(st)));
    std::cout << "score: " << st.cumulative_reward << "\n";
    return 0;
}

int cmd_train(const ScenarioFlags& sf, const GameFlags& gf, const AgentFlags& af, std::size_t episodes,
              const std::string& out, std::size_t workers) {
    const sw::Environment env(load_assets(sf), gf.config());
    const auto cfg = af.config(gf.seed);
    const auto rep = sw::train(sw::agent_kind_from_string(af.agent), env, cfg, episodes, af.table(), workers);
    const fs::path dir(out.empty() ? "." : out);
    write_file(dir / (af.agent + "_report.csv"), sw::report_csv(rep));
    write_file(dir / (af.agent + "_summary.json"), sw::report_summary(rep).dump(2) + "\n");
    std::cout << std::fixed << std::setprecision(3) << "agent: " << af.agent << "\nepisodes: " << episodes
              << "\nlast-" << cfg.window << " mean: " << rep.last_mean(cfg.window)
              << "\ncoverage: " << (rep.coverage.empty() ? 0.0 : rep.coverage.back()) << "%"
              << "\neval: " << rep.eval.mean << " +- " << rep.eval.sd << " over " << cfg.eval_episodes << " episodes"
              << "\nwall: " << rep.wall_seconds << " s\nreport: " << (dir / (af.agent + "_report.csv")).string() << "\n";
    return 0;
}

int cmd_eval(const ScenarioFlags& sf, const GameFlags& gf, const AgentFlags& af, std::size_t train_episodes,
             std::size_t episodes, const std::string& out, std::size_t workers) {
    const sw::Environment env(load_assets(sf), gf.config());
    auto cfg = af.config(gf.seed);
    auto agent = sw::make_agent(sw::agent_kind_from_string(af.agent), cfg, af.table());
    if (train_episodes > 0) {
        cfg.eval_episodes = 0;
        sw::train(*agent, env, cfg, train_episodes);
    }
    const auto scores = sw::evaluate(*agent, env, episodes, sw::eval_seed(gf.seed), workers);
    const auto ms = sw::mean_sd(scores);
    const json summary{{"engine_version", std::string(sw::kEngineVersion)},
                       {"agent", af.agent},
                       {"scenario", env.assets().scenario.title},
                       {"game_config", sw::to_json(env.config())},
                       {"agent_config", sw::to_json(cfg)},
                       {"train_episodes", train_episodes},
                       {"episodes", episodes},
                       {"mean", ms.mean},
                       {"sd", ms.sd},
                       {"scores", scores}};
    if (!out.empty()) write_file(fs::path(out) / ("eval_" + af.agent + ".json"), summary.dump() + "\n");
    std::cout << std::fixed << std::setprecision(4) << "agent: " << af.agent << "\nepisodes: " << episodes
              << "\nmean: " << ms.mean << "\nsd: " << ms.sd << "\n";
    return 0;
}

int cmd_stats(const ScenarioFlags& sf, bool as_json) {
    const auto assets = load_assets(sf);
    const auto& s = assets->scenario;
    const auto st = sw::stats(assets->graph, s);
    const auto ts = sw::text_stats(s);
    json j{{"scenario", s.title},
           {"clusters", s.clusters.size()},
           {"compact_edges", assets->compact.dag.edge_count()},
           {"neg_distance", s.neg_distance},
           {"nodes", st.node_count},
           {"avg_degree", st.avg_degree},
           {"total_paths", st.total_paths.str()},
           {"total_paths_sci", sw::scientific(st.total_paths)},
           {"action_texts", ts.action_texts},
           {"vocabulary", ts.vocabulary},
           {"avg_words_per_text", ts.avg_words}};
    const auto published = sw::published_stats(s.title);
    if (published)
        j["published"] = {{"nodes", published->nodes},
                          {"avg_degree", published->avg_degree},
                          {"total_paths", published->total_paths},
                          {"compact_nodes", published->compact_nodes},
                          {"neg_distance", published->neg_distance}};
    if (as_json) {
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    std::cout << "scenario: " << s.title << "\n"
              << "clusters: " << s.clusters.size() << "\n"
              << "compact edges: " << assets->compact.dag.edge_count() << "\n"
              << "neg distance: " << s.neg_distance << "\n"
              << "nodes: " << st.node_count << "\n"
              << "avg degree: " << std::fixed << std::setprecision(2) << st.avg_degree << "\n"
              << "total paths: " << st.total_paths.str() << " (" << sw::scientific(st.total_paths) << ")\n"
              << "action texts: " << ts.action_texts << "\n"
              << "vocabulary: " << ts.vocabulary << "\n"
              << "avg words per text: " << ts.avg_words << "\n";
    if (published) {
        std::cout << "published (report only): nodes " << published->nodes << ", avg degree " << std::setprecision(1)
                  << published->avg_degree << ", total paths " << published->total_paths << ", compact nodes "
                  << published->compact_nodes << ", neg distance " << published->neg_distance << "\n"
                  << "delta: nodes " << static_cast<long long>(st.node_count) - published->nodes << ", clusters "
                  << static_cast<long long>(s.clusters.size()) - published->compact_nodes << "\n";
    }
    return 0;
}

int cmd_export(const ScenarioFlags& sf, bool compact, bool as_json, const std::string& out) {
    const auto assets = load_assets(sf);
    const std::string body = as_json  ? sw::graph_to_json(assets->graph).dump(2) + "\n"
                             : compact ? sw::export_dot(assets->compact, assets->scenario)
                                       : sw::export_dot(assets->graph);
    if (out.empty()) std::cout << body;
    else write_file(out, body);
    return 0;
}

std::atomic<bool> g_stop{false};

int cmd_serve(const ScenarioFlags& sf, const std::string& tcp, const std::string& out,
              std::optional<std::size_t> max_connections) {
    const auto assets = load_assets(sf);
    std::mutex log_mu;
    std::size_t logged = 0;
    sw::Session::EpisodeHook hook;
    if (!out.empty()) {
        fs::create_directories(out);
        hook = [&](const sw::GameState& st) {
            std::lock_guard lock(log_mu);
            std::ostringstream name;
            name << "episode_" << std::setw(6) << std::setfill('0') << logged++ << ".jsonl";
            write_file(fs::path(out) / name.str(), sw::to_jsonl(sw::transcript(st)));
        };
    }
    if (tcp.empty()) {
        sw::serve_stream(assets, std::cin, std::cout, hook);
        return 0;
    }
    const auto colon = tcp.rfind(':');
    if (colon == std::string::npos) throw UsageError("--tcp expects HOST:PORT");
    sw::TcpOptions opt;
    opt.host = tcp.substr(0, colon);
    try {
        opt.port = static_cast<std::uint16_t>(std::stoul(tcp.substr(colon + 1)));
    } catch (const std::exception&) {
        throw UsageError("bad port in '" + tcp + "'");
    }
    opt.on_episode_end = hook;
    opt.max_connections = max_connections;
    opt.on_listening = [](std::uint16_t port) { std::cerr << "listening on port " << port << std::endl; };
    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    sw::serve_tcp(assets, opt, g_stop);
    return 0;
}

int cmd_gen_matrix(const std::vector<std::string>& scenarios, bool builtin, const GameFlags& gf, const AgentFlags& af,
                   std::size_t episodes, std::size_t eval_episodes, const std::string& out, std::size_t workers) {
    std::vector<std::shared_ptr<const sw::GameAssets>> assets;
    if (builtin) assets.push_back(sw::make_assets(sw::builtin_scenario()));
    for (const auto& p : scenarios) assets.push_back(sw::make_assets(sw::load_scenario(p)));
    if (assets.size() < 2) throw UsageError("gen-matrix needs at least two scenarios");
    if (gf.handicap) throw UsageError("gen-matrix runs without hints");
    const auto cfg = af.config(gf.seed);
    const auto table = af.table();
    std::vector<sw::Environment> envs;
    std::vector<std::unique_ptr<sw::Agent>> agents;
    for (const auto& a : assets) {
        envs.emplace_back(a, gf.config());
        agents.push_back(sw::make_agent(sw::agent_kind_from_string(af.agent), cfg, table));
        auto train_cfg = cfg;
        train_cfg.eval_episodes = 0;
        sw::train(*agents.back(), envs.back(), train_cfg, episodes);
    }
    std::vector<const sw::Agent*> agent_ptrs;
    std::vector<const sw::Environment*> env_ptrs;
    for (std::size_t i = 0; i < envs.size(); ++i) {
        agent_ptrs.push_back(agents[i].get());
        env_ptrs.push_back(&envs[i]);
    }
    const auto csv = sw::to_csv(sw::cross_eval(agent_ptrs, env_ptrs, eval_episodes, sw::eval_seed(gf.seed), workers));
    if (!out.empty()) write_file(fs::path(out) / "matrix.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_replay(const ScenarioFlags& sf, const std::string& log_path) {
    const auto assets = load_assets(sf);
    const std::string body = sw::detail::read_file(log_path);
    try {
        const auto v = sw::replay(body, assets);
        std::cout << "OK: " << v.steps << " steps replayed byte-identically (seed " << v.seed << ")\n";
        return 0;
    } catch (const sw::MismatchError& e) {
        std::cout << "MISMATCH at step " << e.step() << ": " << e.what() << "\n";
        return 1;
    } catch (const sw::VersionMismatch& e) {
        std::cout << "VERSION MISMATCH: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ScriptWorld: choice-based text games built from event sequence scripts"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sw::kEngineVersion));

    ScenarioFlags sf;
    GameFlags gf;
    AgentFlags af;
    std::size_t episodes = 2000;
    std::size_t train_episodes = 0;
    std::size_t eval_episodes = 1000;
    std::size_t workers = 1;
    std::string out;
    std::string transcript;
    bool as_json = false;
    bool dot = false;
    bool compact = false;
    std::string tcp;
    std::optional<std::size_t> max_connections;
    std::string log_path;
    std::vector<std::string> scenarios;

    auto* play = app.add_subcommand("play", "Play interactively on the terminal");
    add_scenario_flags(play, sf);
    add_game_flags(play, gf);
    play->add_option("--transcript", transcript, "Write the episode log (JSONL) here");

    auto* train = app.add_subcommand("train", "Train an agent and write a report CSV and summary JSON");
    add_scenario_flags(train, sf);
    add_game_flags(train, gf);
    add_agent_flags(train, af, {"random", "oracle", "tabq", "dqn", "reinforce"});
    train->add_option("--episodes", episodes, "Training episodes")->capture_default_str();
    train->add_option("--out", out, "Output directory (default: current)");
    train->add_option("--workers", workers, "Threads for evaluation")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "Evaluate a frozen agent, optionally after training it");
    add_scenario_flags(eval, sf);
    add_game_flags(eval, gf);
    add_agent_flags(eval, af, {"random", "oracle", "tabq", "dqn", "reinforce"});
    eval->add_option("--train-episodes", train_episodes, "Training episodes before evaluation")->capture_default_str();
    eval->add_option("--episodes", eval_episodes, "Evaluation episodes")->capture_default_str();
    eval->add_option("--out", out, "Directory for eval_<agent>.json");
    eval->add_option("--workers", workers, "Evaluation threads")->capture_default_str();

    auto* stats = app.add_subcommand("stats", "Print graph and text statistics");
    add_scenario_flags(stats, sf);
    stats->add_flag("--json", as_json, "Emit JSON");

    auto* exp = app.add_subcommand("export", "Export the scenario graph (DOT by default)");
    add_scenario_flags(exp, sf);
    auto* dot_flag = exp->add_flag("--dot", dot, "Scenario graph as Graphviz DOT");
    auto* compact_flag = exp->add_flag("--compact", compact, "Compact graph as Graphviz DOT")->excludes(dot_flag);
    exp->add_flag("--json", as_json, "Scenario graph as JSON")->excludes(dot_flag)->excludes(compact_flag);
    exp->add_option("--out", out, "Output file (stdout otherwise)");

    auto* serve = app.add_subcommand("serve", "Serve the NDJSON agent protocol on stdio or TCP");
    add_scenario_flags(serve, sf);
    serve->add_option("--tcp", tcp, "Listen on HOST:PORT instead of stdio");
    serve->add_option("--out", out, "Directory for per-episode logs");
    serve->add_option("--max-connections", max_connections, "Exit after serving this many TCP connections");

    auto* matrix = app.add_subcommand("gen-matrix", "Train on each scenario, evaluate on all, write a CSV matrix");
    matrix->add_option("--scenario", scenarios, "Scenario JSON file (repeatable)");
    matrix->add_flag("--builtin", sf.builtin, "Include the bundled scenario");
    add_game_flags(matrix, gf);
    add_agent_flags(matrix, af, {"random", "tabq", "dqn", "reinforce"});
    matrix->add_option("--episodes", episodes, "Training episodes per scenario")->capture_default_str();
    matrix->add_option("--out", out, "Directory for matrix.csv");
    matrix->add_option("--workers", workers, "Evaluation threads")->capture_default_str();

    auto* rep = app.add_subcommand("replay", "Re-run an episode log and check it byte for byte");
    add_scenario_flags(rep, sf);
    rep->add_option("--log", log_path, "Episode log (JSONL)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*play) return cmd_play(sf, gf, transcript);
        if (*train) return cmd_train(sf, gf, af, episodes, out, workers);
        if (*eval) return cmd_eval(sf, gf, af, train_episodes, eval_episodes, out, workers);
        if (*stats) return cmd_stats(sf, as_json);
        if (*exp) return cmd_export(sf, compact, as_json, out);
        if (*serve) return cmd_serve(sf, tcp, out, max_connections);
        if (*matrix) return cmd_gen_matrix(scenarios, sf.builtin, gf, af, episodes, af.eval_episodes, out, workers);
        if (*rep) return cmd_replay(sf, log_path);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const sw::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const sw::SamplingError& e) {
        // Raised at construction when the settings cannot be satisfied.
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
