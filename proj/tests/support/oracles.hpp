#pragma once

// Test-only reference implementations. Nothing here calls into the engine's
// own successor, distance or counting code.

#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scriptworld/corpus.hpp"
#include "scriptworld/graph.hpp"
#include "scriptworld/rng.hpp"

namespace scriptworld::testing {

/// Adjacency copied out of a graph into plain vectors.
struct PlainGraph {
    std::vector<std::vector<std::size_t>> out, in;
    std::size_t start = 0, end = 0;

    static PlainGraph from(const Dag& g, NodeId start, NodeId end) {
        PlainGraph p;
        p.out.resize(g.size());
        p.in.resize(g.size());
        for (auto [a, b] : g.edges()) {
            p.out[a.index()].push_back(b.index());
            p.in[b.index()].push_back(a.index());
        }
        p.start = start.index();
        p.end = end.index();
        return p;
    }
};

/// Explicit enumeration of every start->end walk; no memoization.
inline std::uint64_t enumerate_walks(const PlainGraph& g) {
    std::uint64_t walks = 0;
    std::vector<std::size_t> stack{g.start};
    while (!stack.empty()) {
        std::size_t n = stack.back();
        stack.pop_back();
        if (n == g.end) {
            ++walks;
            continue;
        }
        for (std::size_t m : g.out[n]) stack.push_back(m);
    }
    return walks;
}

/// Plain BFS over the undirected version of the graph.
inline std::vector<int> bfs_undirected(const PlainGraph& g, std::size_t source) {
    std::vector<int> dist(g.out.size(), -1);
    std::queue<std::size_t> q;
    q.push(source);
    dist[source] = 0;
    while (!q.empty()) {
        std::size_t n = q.front();
        q.pop();
        for (const auto* adj : {&g.out[n], &g.in[n]}) {
            for (std::size_t m : *adj) {
                if (dist[m] < 0) {
                    dist[m] = dist[n] + 1;
                    q.push(m);
                }
            }
        }
    }
    return dist;
}

/// Step nodes the agent may pick next from `node`, computed recursively from
/// node kinds: entry/exit/START are transparent, END and steps stop the walk.
inline std::set<std::size_t> successor_steps(const ScenarioGraph& g, std::size_t node) {
    std::set<std::size_t> out;
    for (NodeId m : g.dag.out(node_at(node))) {
        const auto kind = g.node(m).kind;
        if (kind == NodeKind::Step) out.insert(m.index());
        else if (kind != NodeKind::End) {
            auto deeper = successor_steps(g, m.index());
            out.insert(deeper.begin(), deeper.end());
        }
    }
    return out;
}

/// Expected total score of the uniform-random policy, solved exactly as an
/// absorbing Markov chain over (node, consecutive wrong count).
///
/// Each turn the pick is correct with probability 1/k. Correct moves to a
/// uniformly chosen successor step (absorbing with +10 if it has none); wrong
/// costs 1, ends the game at `limit` consecutive wrongs and otherwise hops
/// back `back_hop` times to a uniform predecessor (staying put at START).
inline double random_policy_expected_score(const ScenarioGraph& g, int k, int back_hop, int limit) {
    const std::size_t n = g.size();
    std::vector<std::set<std::size_t>> succ(n);
    for (std::size_t i = 0; i < n; ++i) succ[i] = successor_steps(g, i);

    // distribution over landing nodes after back_hop hops from each node
    auto hop_back = [&](std::size_t from) {
        std::map<std::size_t, double> dist{{from, 1.0}};
        for (int h = 0; h < back_hop; ++h) {
            std::map<std::size_t, double> next;
            for (auto [node, p] : dist) {
                if (node == g.start.index()) {
                    next[node] += p;
                    continue;
                }
                const auto preds = g.dag.in(node_at(node));
                for (NodeId pr : preds) next[pr.index()] += p / static_cast<double>(preds.size());
            }
            dist = std::move(next);
        }
        return dist;
    };

    const auto idx = [&](std::size_t node, int wrong) { return node * static_cast<std::size_t>(limit) + static_cast<std::size_t>(wrong); };
    const std::size_t states = n * static_cast<std::size_t>(limit);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(states));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(states));
    const double pc = 1.0 / k;
    const double pw = 1.0 - pc;
    for (std::size_t node = 0; node < n; ++node) {
        for (int w = 0; w < limit; ++w) {
            const auto row = static_cast<Eigen::Index>(idx(node, w));
            if (succ[node].empty()) continue; // never occupied with choices
            for (std::size_t s : succ[node]) {
                const double p = pc / static_cast<double>(succ[node].size());
                if (succ[s].empty()) b[row] += p * 10.0;
                else a(row, static_cast<Eigen::Index>(idx(s, 0))) -= p;
            }
            b[row] += pw * -1.0;
            if (w + 1 < limit) {
                for (auto [land, p] : hop_back(node)) a(row, static_cast<Eigen::Index>(idx(land, w + 1))) -= pw * p;
            }
        }
    }
    Eigen::VectorXd v = a.fullPivLu().solve(b);
    return v[static_cast<Eigen::Index>(idx(g.start.index(), 0))];
}

struct RandomScenarioShape {
    std::size_t max_clusters = 12;
    std::size_t max_sequences = 3;
    std::size_t max_sequence_length = 4;
    std::size_t max_esds = 5;
};

/// Valid random scenario whose clusters follow one hidden global order, so the
/// compact graph is always acyclic.
inline Scenario random_scenario(Rng& rng, const RandomScenarioShape& shape = {}) {
    const std::size_t k = 2 + rng.index(shape.max_clusters - 1);
    Scenario s;
    s.title = "random";
    s.neg_distance = 1;
    std::vector<std::vector<std::size_t>> orders;
    const std::size_t m = 1 + rng.index(shape.max_esds);
    std::vector<bool> covered(k, false);
    for (std::size_t e = 0; e < m; ++e) {
        std::vector<std::size_t> order;
        for (std::size_t c = 0; c < k; ++c)
            if (rng.bernoulli(0.5)) order.push_back(c);
        while (order.size() < 2) {
            order.clear();
            for (std::size_t c = 0; c < k; ++c)
                if (rng.bernoulli(0.6)) order.push_back(c);
        }
        for (auto c : order) covered[c] = true;
        orders.push_back(std::move(order));
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (covered[c]) continue;
        orders.push_back(c + 1 < k ? std::vector<std::size_t>{c, c + 1} : std::vector<std::size_t>{c - 1, c});
        covered[c] = true;
    }
    s.clusters.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        auto& cl = s.clusters[c];
        cl.id = "c" + std::to_string(c);
        cl.label = "cluster " + std::to_string(c);
        const std::size_t nseq = 1 + rng.index(shape.max_sequences);
        for (std::size_t q = 0; q < nseq; ++q) {
            ActionSequence seq(1 + rng.index(shape.max_sequence_length));
            for (std::size_t st = 0; st < seq.size(); ++st) {
                const std::size_t variants = 1 + rng.index(2);
                for (std::size_t v = 0; v < variants; ++v)
                    seq[st].push_back("act " + cl.id + " s" + std::to_string(q) + " k" + std::to_string(st) + " v" +
                                      std::to_string(v));
            }
            cl.sequences.push_back(std::move(seq));
        }
    }
    for (std::size_t e = 0; e < orders.size(); ++e) {
        Esd esd;
        esd.id = "esd" + std::to_string(e);
        for (std::size_t p = 0; p < orders[e].size(); ++p) {
            esd.events.push_back({esd.id, p, "event " + std::to_string(orders[e][p]) + " of " + esd.id});
            s.clusters[orders[e][p]].members.push_back({esd.id, p});
        }
        s.esds.push_back(std::move(esd));
    }
    return s;
}

} // namespace scriptworld::testing
