#pragma once

// Scenario data model: event sequence descriptions (ESDs), aligned event
// clusters with their alternative action sequences, and precomputed hints.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scriptworld/errors.hpp"
#include "scriptworld/text.hpp"

namespace scriptworld {

using json = nlohmann::json;

inline constexpr std::size_t kMinEsdLength = 2;

/// Cluster ids become part of scenario-graph node names, so these are reserved.
inline constexpr std::string_view kStartName = "START";
inline constexpr std::string_view kEndName = "END";
inline constexpr char kNodeSeparator = '#';

struct EventRef {
    std::string esd;
    std::size_t pos = 0;

    friend auto operator<=>(const EventRef&, const EventRef&) = default;
};

struct EventDescription {
    std::string esd_id;
    std::size_t position = 0;
    std::string text;

    friend bool operator==(const EventDescription&, const EventDescription&) = default;
};

struct Esd {
    std::string id;
    std::vector<EventDescription> events;

    friend bool operator==(const Esd&, const Esd&) = default;
};

/// Surface variants for one sub-step of an action sequence.
using SurfaceTexts = std::vector<std::string>;
using ActionSequence = std::vector<SurfaceTexts>;

struct EventCluster {
    std::string id;
    std::string label;
    std::vector<EventRef> members;
    std::vector<ActionSequence> sequences;

    friend bool operator==(const EventCluster&, const EventCluster&) = default;
};

struct Scenario {
    std::string title;
    int neg_distance = 1;
    std::vector<Esd> esds;
    std::vector<EventCluster> clusters;

    std::size_t event_count() const {
        std::size_t n = 0;
        for (const auto& e : esds) n += e.events.size();
        return n;
    }

    const Esd* find_esd(std::string_view id) const {
        auto it = std::find_if(esds.begin(), esds.end(), [&](const Esd& e) { return e.id == id; });
        return it == esds.end() ? nullptr : &*it;
    }

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

enum class Severity { Warning, Error };

struct Finding {
    Severity severity = Severity::Error;
    std::string code;
    std::string location;
    std::string message;
};

inline std::string to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

inline std::string describe(const Finding& f) {
    return to_string(f.severity) + " [" + f.code + "] " + f.location + ": " + f.message;
}

/// Node id -> candidate hint texts. One is drawn per visit.
struct HintStore {
    std::map<std::string, std::vector<std::string>> hints;

    const std::vector<std::string>* find(std::string_view node) const {
        auto it = hints.find(std::string(node));
        return it == hints.end() ? nullptr : &it->second;
    }

    friend bool operator==(const HintStore&, const HintStore&) = default;
};

/// Mechanical checks only. Error findings make load_scenario reject the input.
inline std::vector<Finding> validate_scenario(const Scenario& s) {
    std::vector<Finding> out;
    auto error = [&](std::string code, std::string loc, std::string msg) {
        out.push_back({Severity::Error, std::move(code), std::move(loc), std::move(msg)});
    };
    auto warn = [&](std::string code, std::string loc, std::string msg) {
        out.push_back({Severity::Warning, std::move(code), std::move(loc), std::move(msg)});
    };

    if (text::trim(s.title).empty()) warn("empty-title", "title", "scenario title is empty");
    if (s.neg_distance < 1)
        error("neg-distance", "neg_distance",
              "negative sampling distance must be >= 1, got " + std::to_string(s.neg_distance));

    std::map<std::string, const Esd*> esd_by_id;
    for (std::size_t i = 0; i < s.esds.size(); ++i) {
        const Esd& e = s.esds[i];
        const std::string loc = "esds[" + std::to_string(i) + "]";
        if (e.id.empty()) error("empty-id", loc, "ESD id is empty");
        if (!esd_by_id.emplace(e.id, &e).second) error("duplicate-esd", loc, "duplicate ESD id '" + e.id + "'");
        if (e.events.size() < kMinEsdLength)
            error("short-esd", loc,
                  "ESD '" + e.id + "' has " + std::to_string(e.events.size()) + " event(s); minimum is " +
                      std::to_string(kMinEsdLength));
        for (std::size_t p = 0; p < e.events.size(); ++p) {
            if (text::trim(e.events[p].text).empty())
                error("empty-text", loc + ".events[" + std::to_string(p) + "]", "event text is empty");
        }
    }

    std::map<EventRef, std::string> owner;
    std::set<std::string> cluster_ids;
    for (std::size_t ci = 0; ci < s.clusters.size(); ++ci) {
        const EventCluster& c = s.clusters[ci];
        const std::string loc = "clusters[" + std::to_string(ci) + "]";
        if (c.id.empty()) error("empty-id", loc, "cluster id is empty");
        if (c.id == kStartName || c.id == kEndName || c.id.find(kNodeSeparator) != std::string::npos)
            error("reserved-id", loc, "cluster id '" + c.id + "' is reserved or contains '#'");
        if (!cluster_ids.insert(c.id).second) error("duplicate-cluster", loc, "duplicate cluster id '" + c.id + "'");
        if (c.members.empty()) error("empty-cluster", loc, "cluster '" + c.id + "' has no members");
        for (const EventRef& m : c.members) {
            const std::string mloc = loc + " member " + m.esd + ":" + std::to_string(m.pos);
            auto it = esd_by_id.find(m.esd);
            if (it == esd_by_id.end() || m.pos >= it->second->events.size()) {
                error("dangling-member", mloc, "member does not resolve to an event");
                continue;
            }
            auto [pos, fresh] = owner.emplace(m, c.id);
            if (!fresh)
                error("duplicate-member", mloc, "event already belongs to cluster '" + pos->second + "'");
        }
        if (c.sequences.empty()) error("no-sequences", loc, "cluster '" + c.id + "' has no action sequence");
        for (std::size_t q = 0; q < c.sequences.size(); ++q) {
            const std::string qloc = loc + ".sequences[" + std::to_string(q) + "]";
            if (c.sequences[q].empty()) error("empty-sequence", qloc, "action sequence is empty");
            for (std::size_t k = 0; k < c.sequences[q].size(); ++k) {
                const auto& variants = c.sequences[q][k];
                const bool blank = std::any_of(variants.begin(), variants.end(),
                                               [](const std::string& t) { return text::trim(t).empty(); });
                if (variants.empty() || blank)
                    error("empty-substep", qloc + "[" + std::to_string(k) + "]",
                          "sub-step needs at least one non-empty surface text");
            }
        }
    }

    for (const Esd& e : s.esds) {
        for (std::size_t p = 0; p < e.events.size(); ++p) {
            if (!owner.count(EventRef{e.id, p}))
                error("uncovered-event", "esd " + e.id + ":" + std::to_string(p),
                      "event '" + e.events[p].text + "' belongs to no cluster");
        }
        for (std::size_t p = 0; p + 1 < e.events.size(); ++p) {
            auto a = owner.find(EventRef{e.id, p});
            auto b = owner.find(EventRef{e.id, p + 1});
            if (a != owner.end() && b != owner.end() && a->second == b->second)
                warn("repeated-cluster", "esd " + e.id + ":" + std::to_string(p),
                     "consecutive events share cluster '" + a->second + "'; no self edge is drawn");
        }
    }
    return out;
}

inline bool has_errors(const std::vector<Finding>& findings) {
    return std::any_of(findings.begin(), findings.end(),
                       [](const Finding& f) { return f.severity == Severity::Error; });
}

namespace detail {

template <class T>
T required(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key))
        throw ParseError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(where + "." + key + ": " + e.what());
    }
}

inline const json& required_array(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_array())
        throw ParseError(where + ": field '" + key + "' must be an array");
    return j.at(key);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace detail

/// Structural parse only; no invariant checks.
inline Scenario scenario_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("scenario: top level must be an object");
    Scenario s;
    s.title = detail::required<std::string>(j, "title", "scenario");
    s.neg_distance = detail::required<int>(j, "neg_distance", "scenario");

    const json& esds = detail::required_array(j, "esds", "scenario");
    for (std::size_t i = 0; i < esds.size(); ++i) {
        const std::string where = "esds[" + std::to_string(i) + "]";
        Esd e;
        e.id = detail::required<std::string>(esds[i], "id", where);
        const json& events = detail::required_array(esds[i], "events", where);
        for (std::size_t p = 0; p < events.size(); ++p) {
            if (!events[p].is_string()) throw ParseError(where + ".events: entries must be strings");
            e.events.push_back({e.id, p, events[p].get<std::string>()});
        }
        s.esds.push_back(std::move(e));
    }

    const json& clusters = detail::required_array(j, "clusters", "scenario");
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const std::string where = "clusters[" + std::to_string(i) + "]";
        EventCluster c;
        c.id = detail::required<std::string>(clusters[i], "id", where);
        c.label = clusters[i].value("label", c.id);
        for (const json& m : detail::required_array(clusters[i], "members", where)) {
            c.members.push_back({detail::required<std::string>(m, "esd", where + ".members"),
                                 detail::required<std::size_t>(m, "pos", where + ".members")});
        }
        try {
            c.sequences = detail::required_array(clusters[i], "sequences", where).get<std::vector<ActionSequence>>();
        } catch (const json::exception& e) {
            throw ParseError(where + ".sequences: " + e.what());
        }
        s.clusters.push_back(std::move(c));
    }
    return s;
}

inline json to_json(const Scenario& s) {
    json j;
    j["title"] = s.title;
    j["neg_distance"] = s.neg_distance;
    j["esds"] = json::array();
    for (const Esd& e : s.esds) {
        json events = json::array();
        for (const auto& ev : e.events) events.push_back(ev.text);
        j["esds"].push_back({{"id", e.id}, {"events", std::move(events)}});
    }
    j["clusters"] = json::array();
    for (const EventCluster& c : s.clusters) {
        json members = json::array();
        for (const auto& m : c.members) members.push_back({{"esd", m.esd}, {"pos", m.pos}});
        j["clusters"].push_back(
            {{"id", c.id}, {"label", c.label}, {"members", std::move(members)}, {"sequences", c.sequences}});
    }
    return j;
}

/// Parse and validate; throws ParseError or ValidationError (first error finding).
inline Scenario parse_scenario(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scenario JSON: ") + e.what());
    }
    Scenario s = scenario_from_json(j);
    for (const Finding& f : validate_scenario(s)) {
        if (f.severity == Severity::Error) throw ValidationError(f.location + ": " + f.message);
    }
    return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    return parse_scenario(detail::read_file(path));
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << to_json(s).dump(2) << '\n';
}

/// Hint JSONL: one {"node": str, "hints": [str]} per line. Coverage and
/// repeat checks need the scenario graph; see hints.hpp.
inline HintStore parse_hint_lines(std::istream& in) {
    HintStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const std::string where = "hints line " + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where + ": " + e.what());
        }
        auto node = detail::required<std::string>(j, "node", where);
        auto hints = detail::required<std::vector<std::string>>(j, "hints", where);
        if (hints.empty()) throw ParseError(where + ": node '" + node + "' has an empty hint list");
        if (!store.hints.emplace(node, std::move(hints)).second)
            throw ParseError(where + ": duplicate node '" + node + "'");
    }
    return store;
}

struct TextStats {
    std::size_t action_texts = 0;
    std::size_t vocabulary = 0;
    double avg_words = 0;
};

/// Token statistics over every surface text an observation can show.
inline TextStats text_stats(const Scenario& s) {
    TextStats st;
    std::set<std::string> vocab;
    std::size_t words = 0;
    for (const auto& c : s.clusters)
        for (const auto& seq : c.sequences)
            for (const auto& variants : seq)
                for (const auto& t : variants) {
                    const auto tokens = text::tokenize(t);
                    words += tokens.size();
                    vocab.insert(tokens.begin(), tokens.end());
                    ++st.action_texts;
                }
    st.vocabulary = vocab.size();
    if (st.action_texts) st.avg_words = static_cast<double>(words) / static_cast<double>(st.action_texts);
    return st;
}

inline std::string hints_to_jsonl(const HintStore& store) {
    std::string out;
    for (const auto& [node, hints] : store.hints) {
        out += json{{"node", node}, {"hints", hints}}.dump();
        out += '\n';
    }
    return out;
}

} // namespace scriptworld
