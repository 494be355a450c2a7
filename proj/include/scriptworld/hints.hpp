#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "scriptworld/corpus.hpp"
#include "scriptworld/graph.hpp"

namespace scriptworld {

/// Checks a parsed hint store against the scenario graph: every node a game
/// can occupy (all but END) needs hints, and no hint may repeat an action
/// text of the scenario verbatim (trimmed, case-insensitive).
inline void check_hints(const HintStore& store, const ScenarioGraph& g) {
    std::set<std::string> actions;
    for (const auto& texts : g.action_texts)
        for (const auto& t : texts) actions.insert(text::normalize(t));

    std::string missing;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const NodeId n = node_at(i);
        if (n == g.end) continue;
        if (!store.find(g.dag.name(n))) missing += (missing.empty() ? "" : ", ") + g.dag.name(n);
    }
    if (!missing.empty()) throw CoverageError("no hints for node(s): " + missing);

    for (const auto& [node, hints] : store.hints) {
        if (!g.dag.find(node)) throw CoverageError("hint for unknown node '" + node + "'");
        for (const auto& h : hints) {
            if (text::trim(h).empty()) throw ParseError("empty hint for node '" + node + "'");
            if (actions.count(text::normalize(h)))
                throw RepeatError("hint '" + h + "' for node '" + node + "' repeats an action text");
        }
    }
}

inline HintStore parse_hints(std::string_view jsonl, const Scenario& s) {
    std::istringstream in{std::string(jsonl)};
    HintStore store = parse_hint_lines(in);
    check_hints(store, build_scenario_graph(s));
    return store;
}

inline HintStore load_hints(const std::filesystem::path& path, const Scenario& s) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    HintStore store = parse_hint_lines(in);
    check_hints(store, build_scenario_graph(s));
    return store;
}

} // namespace scriptworld
