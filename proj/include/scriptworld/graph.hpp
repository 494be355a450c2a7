#pragma once

// Compact graph over event clusters and its expansion into the scenario
// graph whose nodes are the environment states.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "scriptworld/corpus.hpp"
#include "scriptworld/errors.hpp"

namespace scriptworld {

using BigInt = boost::multiprecision::cpp_int;

struct NodeId {
    std::uint32_t value = 0;

    constexpr std::size_t index() const noexcept { return value; }
    friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

inline constexpr NodeId node_at(std::size_t i) noexcept { return NodeId{static_cast<std::uint32_t>(i)}; }

/// Named directed graph with sorted, duplicate-free adjacency.
class Dag {
public:
    NodeId add_node(std::string name) {
        const NodeId id = node_at(names_.size());
        index_.emplace(name, id);
        names_.push_back(std::move(name));
        out_.emplace_back();
        in_.emplace_back();
        return id;
    }

    void add_edge(NodeId from, NodeId to) {
        auto& o = out_[from.index()];
        auto it = std::lower_bound(o.begin(), o.end(), to);
        if (it != o.end() && *it == to) return;
        o.insert(it, to);
        auto& i = in_[to.index()];
        i.insert(std::lower_bound(i.begin(), i.end(), from), from);
        ++edge_count_;
    }

    std::size_t size() const noexcept { return names_.size(); }
    std::size_t edge_count() const noexcept { return edge_count_; }
    const std::string& name(NodeId n) const { return names_.at(n.index()); }
    std::span<const NodeId> out(NodeId n) const { return out_.at(n.index()); }
    std::span<const NodeId> in(NodeId n) const { return in_.at(n.index()); }
    bool has_edge(NodeId a, NodeId b) const { return std::binary_search(out(a).begin(), out(a).end(), b); }

    std::optional<NodeId> find(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    NodeId at(std::string_view name) const {
        if (auto n = find(name)) return *n;
        throw UnknownNode("unknown node '" + std::string(name) + "'");
    }

    std::vector<std::pair<NodeId, NodeId>> edges() const {
        std::vector<std::pair<NodeId, NodeId>> e;
        e.reserve(edge_count_);
        for (std::size_t a = 0; a < size(); ++a)
            for (NodeId b : out_[a]) e.emplace_back(node_at(a), b);
        return e;
    }

    /// Kahn's algorithm with smallest-index tie-breaking; nullopt if cyclic.
    std::optional<std::vector<NodeId>> topological_order() const {
        std::vector<std::size_t> indeg(size());
        for (std::size_t i = 0; i < size(); ++i) indeg[i] = in_[i].size();
        std::vector<NodeId> ready;
        for (std::size_t i = size(); i-- > 0;)
            if (indeg[i] == 0) ready.push_back(node_at(i));
        std::vector<NodeId> order;
        order.reserve(size());
        while (!ready.empty()) {
            NodeId n = ready.back();
            ready.pop_back();
            order.push_back(n);
            for (NodeId m : out_[n.index()]) {
                if (--indeg[m.index()] == 0) {
                    ready.insert(std::upper_bound(ready.begin(), ready.end(), m, std::greater<>{}), m);
                }
            }
        }
        if (order.size() != size()) return std::nullopt;
        return order;
    }

    /// One directed cycle, or empty if acyclic.
    std::vector<NodeId> find_cycle() const {
        enum Mark : std::uint8_t { White, Grey, Black };
        std::vector<Mark> mark(size(), White);
        std::vector<NodeId> parent(size());
        for (std::size_t root = 0; root < size(); ++root) {
            if (mark[root] != White) continue;
            std::vector<std::pair<NodeId, std::size_t>> stack{{node_at(root), 0}};
            mark[root] = Grey;
            while (!stack.empty()) {
                auto& [n, next] = stack.back();
                if (next < out_[n.index()].size()) {
                    NodeId m = out_[n.index()][next++];
                    if (mark[m.index()] == Grey) {
                        std::vector<NodeId> cycle{m};
                        for (NodeId cur = n; cur != m; cur = parent[cur.index()]) cycle.push_back(cur);
                        std::reverse(cycle.begin() + 1, cycle.end());
                        return cycle;
                    }
                    if (mark[m.index()] == White) {
                        mark[m.index()] = Grey;
                        parent[m.index()] = n;
                        stack.emplace_back(m, 0);
                    }
                } else {
                    mark[n.index()] = Black;
                    stack.pop_back();
                }
            }
        }
        return {};
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, NodeId> index_;
    std::vector<std::vector<NodeId>> out_;
    std::vector<std::vector<NodeId>> in_;
    std::size_t edge_count_ = 0;
};

inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

/// Undirected BFS hop counts from source; kUnreachable where disconnected.
inline std::vector<std::size_t> undirected_hops_from(const Dag& g, NodeId source) {
    std::vector<std::size_t> dist(g.size(), kUnreachable);
    std::deque<NodeId> queue{source};
    dist[source.index()] = 0;
    while (!queue.empty()) {
        NodeId n = queue.front();
        queue.pop_front();
        auto visit = [&](NodeId m) {
            if (dist[m.index()] == kUnreachable) {
                dist[m.index()] = dist[n.index()] + 1;
                queue.push_back(m);
            }
        };
        for (NodeId m : g.out(n)) visit(m);
        for (NodeId m : g.in(n)) visit(m);
    }
    return dist;
}

// ---------------------------------------------------------------------------
// Compact graph

struct CompactGraph {
    Dag dag;
    NodeId start;
    NodeId end;
    /// Index into Scenario::clusters, nullopt for the sentinels.
    std::vector<std::optional<std::size_t>> cluster_of;
    /// Position of each node in a topological order.
    std::vector<std::size_t> node_order;

    std::size_t cluster_count() const { return dag.size() - 2; }
};

/// Edge p->q iff some ESD has consecutive events in p then q. Consecutive
/// events of one cluster add no edge. Throws CycleError.
inline CompactGraph build_compact(const Scenario& s) {
    CompactGraph cg;
    cg.start = cg.dag.add_node(std::string(kStartName));
    cg.cluster_of.push_back(std::nullopt);
    std::map<EventRef, NodeId> node_of_event;
    for (std::size_t ci = 0; ci < s.clusters.size(); ++ci) {
        NodeId n = cg.dag.add_node(s.clusters[ci].id);
        cg.cluster_of.push_back(ci);
        for (const EventRef& m : s.clusters[ci].members) node_of_event.emplace(m, n);
    }
    cg.end = cg.dag.add_node(std::string(kEndName));
    cg.cluster_of.push_back(std::nullopt);

    auto lookup = [&](const Esd& e, std::size_t p) {
        auto it = node_of_event.find(EventRef{e.id, p});
        if (it == node_of_event.end())
            throw ValidationError("event " + e.id + ":" + std::to_string(p) + " belongs to no cluster");
        return it->second;
    };
    for (const Esd& e : s.esds) {
        if (e.events.empty()) continue;
        cg.dag.add_edge(cg.start, lookup(e, 0));
        for (std::size_t p = 0; p + 1 < e.events.size(); ++p) {
            NodeId a = lookup(e, p);
            NodeId b = lookup(e, p + 1);
            if (a != b) cg.dag.add_edge(a, b);
        }
        cg.dag.add_edge(lookup(e, e.events.size() - 1), cg.end);
    }

    auto order = cg.dag.topological_order();
    if (!order) {
        std::string msg = "compact graph has a cycle:";
        auto cycle = cg.dag.find_cycle();
        for (NodeId n : cycle) msg += " " + cg.dag.name(n) + " ->";
        if (!cycle.empty()) msg += " " + cg.dag.name(cycle.front());
        throw CycleError(msg);
    }
    cg.node_order.assign(cg.dag.size(), 0);
    for (std::size_t i = 0; i < order->size(); ++i) cg.node_order[(*order)[i].index()] = i;
    return cg;
}

// ---------------------------------------------------------------------------
// Scenario graph

enum class NodeKind { Start, End, Entry, Exit, Step };

inline std::string_view to_string(NodeKind k) {
    switch (k) {
    case NodeKind::Start: return "start";
    case NodeKind::End: return "end";
    case NodeKind::Entry: return "entry";
    case NodeKind::Exit: return "exit";
    case NodeKind::Step: return "step";
    }
    return "?";
}

struct ScenarioNode {
    NodeKind kind = NodeKind::Start;
    std::size_t cluster = 0;   // meaningful for Entry/Exit/Step
    std::size_t sequence = 0;  // Step only
    std::size_t step = 0;      // Step only
};

inline std::string entry_name(std::string_view cluster) { return std::string(cluster) + kNodeSeparator + "entry"; }
inline std::string exit_name(std::string_view cluster) { return std::string(cluster) + kNodeSeparator + "exit"; }
inline std::string step_name(std::string_view cluster, std::size_t seq, std::size_t step) {
    return std::string(cluster) + kNodeSeparator + std::to_string(seq) + "." + std::to_string(step);
}

struct ScenarioGraph {
    Dag dag;
    NodeId start;
    NodeId end;
    std::vector<ScenarioNode> info;
    /// Surface texts per node; empty except for Step nodes.
    std::vector<std::vector<std::string>> action_texts;
    std::size_t cluster_count = 0;

    const ScenarioNode& node(NodeId n) const { return info.at(n.index()); }
    bool is_step(NodeId n) const { return node(n).kind == NodeKind::Step; }
    bool is_sentinel(NodeId n) const { return n == start || n == end; }
    const std::vector<std::string>& texts(NodeId n) const { return action_texts.at(n.index()); }
    std::size_t size() const { return dag.size(); }
};

/// Every cluster splits into entry -> (one chain per action sequence) -> exit;
/// compact edge (p, q) becomes exit(p) -> entry(q).
inline ScenarioGraph expand(const CompactGraph& cg, const Scenario& s) {
    ScenarioGraph g;
    g.cluster_count = s.clusters.size();
    auto add = [&](std::string name, ScenarioNode info, std::vector<std::string> texts = {}) {
        NodeId n = g.dag.add_node(std::move(name));
        g.info.push_back(info);
        g.action_texts.push_back(std::move(texts));
        return n;
    };
    g.start = add(std::string(kStartName), {NodeKind::Start});

    std::vector<NodeId> entry(s.clusters.size()), exit(s.clusters.size());
    for (std::size_t ci = 0; ci < s.clusters.size(); ++ci) {
        const EventCluster& c = s.clusters[ci];
        entry[ci] = add(entry_name(c.id), {NodeKind::Entry, ci});
        std::vector<std::vector<NodeId>> chains;
        for (std::size_t q = 0; q < c.sequences.size(); ++q) {
            std::vector<NodeId> chain;
            for (std::size_t k = 0; k < c.sequences[q].size(); ++k)
                chain.push_back(add(step_name(c.id, q, k), {NodeKind::Step, ci, q, k}, c.sequences[q][k]));
            chains.push_back(std::move(chain));
        }
        exit[ci] = add(exit_name(c.id), {NodeKind::Exit, ci});
        for (const auto& chain : chains) {
            NodeId prev = entry[ci];
            for (NodeId n : chain) {
                g.dag.add_edge(prev, n);
                prev = n;
            }
            g.dag.add_edge(prev, exit[ci]);
        }
    }
    g.end = add(std::string(kEndName), {NodeKind::End});

    auto mapped = [&](NodeId compact_node, bool as_source) {
        if (compact_node == cg.start) return g.start;
        if (compact_node == cg.end) return g.end;
        const std::size_t ci = *cg.cluster_of.at(compact_node.index());
        return as_source ? exit[ci] : entry[ci];
    };
    for (auto [a, b] : cg.dag.edges()) g.dag.add_edge(mapped(a, true), mapped(b, false));
    return g;
}

inline ScenarioGraph build_scenario_graph(const Scenario& s) { return expand(build_compact(s), s); }

/// Closed-form node count of expand(): 2 per cluster, one per sub-step, plus sentinels.
inline std::size_t expected_node_count(const Scenario& s) {
    std::size_t n = 2;
    for (const auto& c : s.clusters) {
        n += 2;
        for (const auto& seq : c.sequences) n += seq.size();
    }
    return n;
}

// ---------------------------------------------------------------------------
// Path counting

/// Sum over START->END compact paths of the product of each visited cluster's
/// number of alternative action sequences. Evaluated by depth-first traversal
/// with memoization of the suffix sums, which factors the same sum of products.
inline BigInt count_paths(const CompactGraph& cg, const Scenario& s) {
    std::vector<std::optional<BigInt>> memo(cg.dag.size());
    auto splits = [&](NodeId n) -> BigInt {
        const auto& ci = cg.cluster_of[n.index()];
        return ci ? BigInt(s.clusters[*ci].sequences.size()) : BigInt(1);
    };
    // Iterative post-order so deep graphs don't exhaust the call stack.
    std::vector<std::pair<NodeId, bool>> stack{{cg.start, false}};
    while (!stack.empty()) {
        auto [n, expanded] = stack.back();
        stack.pop_back();
        if (memo[n.index()]) continue;
        if (n == cg.end) {
            memo[n.index()] = BigInt(1);
            continue;
        }
        if (!expanded) {
            stack.emplace_back(n, true);
            for (NodeId m : cg.dag.out(n))
                if (!memo[m.index()]) stack.emplace_back(m, false);
            continue;
        }
        BigInt suffix = 0;
        for (NodeId m : cg.dag.out(n)) suffix += *memo[m.index()];
        memo[n.index()] = splits(n) * suffix;
    }
    return *memo[cg.start.index()];
}

/// Number of START->END paths in the expanded graph, by DP over a topological order.
inline BigInt count_paths(const ScenarioGraph& g) {
    auto order = g.dag.topological_order();
    if (!order) throw CycleError("scenario graph has a cycle");
    std::vector<BigInt> ways(g.size(), 0);
    ways[g.start.index()] = 1;
    for (NodeId n : *order) {
        if (ways[n.index()] == 0) continue;
        for (NodeId m : g.dag.out(n)) ways[m.index()] += ways[n.index()];
    }
    return ways[g.end.index()];
}

inline BigInt count_paths(const ScenarioGraph& g, const Scenario&) { return count_paths(g); }

// ---------------------------------------------------------------------------
// Distances and statistics

/// Undirected hop count between a and b; nullopt if disconnected.
inline std::optional<std::size_t> hop_distance(const Dag& g, NodeId a, NodeId b) {
    if (a.index() >= g.size() || b.index() >= g.size()) throw UnknownNode("node index out of range");
    const std::size_t d = undirected_hops_from(g, a)[b.index()];
    if (d == kUnreachable) return std::nullopt;
    return d;
}

inline std::optional<std::size_t> hop_distance(const ScenarioGraph& g, NodeId a, NodeId b) {
    return hop_distance(g.dag, a, b);
}

inline std::optional<std::size_t> hop_distance(const ScenarioGraph& g, std::string_view a, std::string_view b) {
    return hop_distance(g.dag, g.dag.at(a), g.dag.at(b));
}

struct GraphStats {
    std::size_t node_count = 0;
    double avg_degree = 0.0;
    BigInt total_paths = 0;
};

/// Sentinels are excluded from the node count and the degree average, but
/// edges into them still count toward their neighbours' degrees.
inline GraphStats stats(const ScenarioGraph& g, const Scenario& s) {
    GraphStats st;
    std::size_t degree_sum = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const NodeId n = node_at(i);
        if (g.is_sentinel(n)) continue;
        ++st.node_count;
        degree_sum += g.dag.out(n).size() + g.dag.in(n).size();
    }
    st.avg_degree = st.node_count ? static_cast<double>(degree_sum) / static_cast<double>(st.node_count) : 0.0;
    st.total_paths = count_paths(g, s);
    return st;
}

/// "3.1e+27" style rendering of a big integer with the given significant digits.
inline std::string scientific(const BigInt& value, int digits = 2) {
    std::string d = value.str();
    bool negative = !d.empty() && d[0] == '-';
    if (negative) d.erase(0, 1);
    if (d.size() <= static_cast<std::size_t>(digits)) return (negative ? "-" : "") + d;
    const std::size_t exponent = d.size() - 1;
    // round half up on the digit after the kept ones
    std::string kept = d.substr(0, static_cast<std::size_t>(digits));
    if (d[static_cast<std::size_t>(digits)] >= '5') {
        int i = digits - 1;
        while (i >= 0 && kept[static_cast<std::size_t>(i)] == '9') kept[static_cast<std::size_t>(i--)] = '0';
        if (i < 0) {
            kept.insert(kept.begin(), '1');
            kept.pop_back();
            return (negative ? "-" : "") + kept.substr(0, 1) + (digits > 1 ? "." + kept.substr(1) : "") + "e+" +
                   std::to_string(exponent + 1);
        }
        ++kept[static_cast<std::size_t>(i)];
    }
    std::string out = negative ? "-" : "";
    out += kept.substr(0, 1);
    if (digits > 1) out += "." + kept.substr(1);
    return out + "e+" + std::to_string(exponent);
}

// ---------------------------------------------------------------------------
// Export

namespace detail {

inline bool plain_dot_id(std::string_view s) {
    if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

inline std::string dot_id(std::string_view s) {
    if (plain_dot_id(s)) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out + "\"";
}

inline std::string dot_from(const Dag& g, std::string_view graph_name,
                            const std::function<std::string(NodeId)>& label) {
    std::vector<NodeId> nodes;
    for (std::size_t i = 0; i < g.size(); ++i) nodes.push_back(node_at(i));
    std::sort(nodes.begin(), nodes.end(), [&](NodeId a, NodeId b) { return g.name(a) < g.name(b); });
    auto edges = g.edges();
    std::sort(edges.begin(), edges.end(), [&](const auto& x, const auto& y) {
        return std::pair(g.name(x.first), g.name(x.second)) < std::pair(g.name(y.first), g.name(y.second));
    });

    std::ostringstream out;
    out << "digraph " << dot_id(graph_name) << " {\n  rankdir=LR;\n";
    for (NodeId n : nodes) out << "  " << dot_id(g.name(n)) << " [label=" << dot_id(label(n)) << "];\n";
    for (auto [a, b] : edges) out << "  " << dot_id(g.name(a)) << " -> " << dot_id(g.name(b)) << ";\n";
    out << "}\n";
    return out.str();
}

} // namespace detail

inline std::string export_dot(const CompactGraph& cg, const Scenario& s) {
    return detail::dot_from(cg.dag, "compact", [&](NodeId n) {
        const auto& ci = cg.cluster_of[n.index()];
        return ci ? s.clusters[*ci].label : cg.dag.name(n);
    });
}

inline std::string export_dot(const ScenarioGraph& g) {
    return detail::dot_from(g.dag, "scenario", [&](NodeId n) {
        const auto& texts = g.texts(n);
        return texts.empty() ? g.dag.name(n) : texts.front();
    });
}

inline json graph_to_json(const ScenarioGraph& g) {
    json nodes = json::array();
    json texts = json::object();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const NodeId n = node_at(i);
        nodes.push_back({{"id", g.dag.name(n)}, {"kind", to_string(g.node(n).kind)}});
        if (g.is_step(n)) texts[g.dag.name(n)] = g.texts(n);
    }
    json edges = json::array();
    for (auto [a, b] : g.dag.edges()) edges.push_back({g.dag.name(a), g.dag.name(b)});
    return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}, {"action_texts", std::move(texts)}};
}

} // namespace scriptworld
