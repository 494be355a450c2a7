#pragma once

// Observation -> fixed-size vectors. Texts are looked up in an embedding
// table by normalized key; anything missing falls back to feature hashing.

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "scriptworld/corpus.hpp"
#include "scriptworld/engine.hpp"
#include "scriptworld/errors.hpp"
#include "scriptworld/text.hpp"

namespace scriptworld {

using Vector = Eigen::VectorXd;

struct EmbeddingTable {
    std::size_t dim = 0;
    std::string model_name;
    std::string created;
    std::map<std::string, Vector, std::less<>> entries;

    const Vector* find(std::string_view text) const {
        auto it = entries.find(text::normalize(text));
        return it == entries.end() ? nullptr : &it->second;
    }
    std::size_t size() const noexcept { return entries.size(); }
};

/// Header line {"dim", "model"[, "created"]}, then one {"text", "vec"} per line.
inline EmbeddingTable parse_embeddings(std::istream& in) {
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::out_of_range& e) {
            // 406: a literal such as 1e999 overflows to infinity
            if (e.id == 406) throw NonFinite(where + ": " + e.what());
            throw ParseError(where + ": " + e.what());
        } catch (const json::parse_error& e) {
            throw ParseError(where + ": " + e.what());
        }
        if (!j.is_object()) throw ParseError(where + ": expected an object");
        try {
            if (!have_header) {
                const auto dim = j.at("dim").get<std::int64_t>();
                if (dim <= 0) throw ParseError(where + ": dim must be positive");
                table.dim = static_cast<std::size_t>(dim);
                table.model_name = j.at("model").get<std::string>();
                table.created = j.value("created", std::string());
                have_header = true;
                continue;
            }
            const std::string key = text::normalize(j.at("text").get<std::string>());
            const auto& vec = j.at("vec");
            if (!vec.is_array()) throw ParseError(where + ": vec must be an array");
            if (vec.size() != table.dim)
                throw DimMismatch(where + ": vector length " + std::to_string(vec.size()) + ", header dim " +
                                  std::to_string(table.dim));
            Vector v(static_cast<Eigen::Index>(table.dim));
            for (std::size_t i = 0; i < table.dim; ++i) {
                if (!vec[i].is_number()) throw ParseError(where + ": non-numeric component");
                v[static_cast<Eigen::Index>(i)] = vec[i].get<double>();
            }
            if (!v.allFinite()) throw NonFinite(where + ": non-finite component for '" + key + "'");
            if (!table.entries.emplace(key, std::move(v)).second)
                throw ParseError(where + ": duplicate text '" + key + "'");
        } catch (const json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    if (!have_header) throw ParseError("embedding file has no header line");
    return table;
}

inline EmbeddingTable parse_embeddings(std::string_view body) {
    std::istringstream in{std::string(body)};
    return parse_embeddings(in);
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    return parse_embeddings(std::string_view(detail::read_file(path)));
}

/// Writes the table back in the same format, keys sorted.
inline std::string to_jsonl(const EmbeddingTable& t) {
    json header{{"dim", t.dim}, {"model", t.model_name}};
    if (!t.created.empty()) header["created"] = t.created;
    std::string out = header.dump() + "\n";
    for (const auto& [key, v] : t.entries) {
        json vec = json::array();
        for (double x : v) vec.push_back(x);
        out += json{{"text", key}, {"vec", vec}}.dump() + "\n";
    }
    return out;
}

/// Signed feature hashing over a bag of tokens, L2-normalized.
class HashFeaturizer {
public:
    explicit HashFeaturizer(std::size_t dim = 64) : dim_(dim) {
        if (dim == 0) throw ConfigError("hash dim must be positive");
    }

    std::size_t dim() const noexcept { return dim_; }

    Vector operator()(std::string_view s) const {
        Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_));
        for (const auto& tok : text::tokenize(s)) {
            const std::uint64_t h = fnv1a(tok);
            const auto bucket = static_cast<Eigen::Index>(h % dim_);
            v[bucket] += (h >> 63) ? -1.0 : 1.0;
        }
        const double norm = v.norm();
        if (norm > 0) v /= norm;
        return v;
    }

    static std::uint64_t fnv1a(std::string_view s) noexcept {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        // FNV leaves the top bit poorly mixed for short keys.
        h ^= h >> 33;
        h *= 0xff51afd7ed558ccdull;
        return h ^ (h >> 33);
    }

private:
    std::size_t dim_;
};

/// Concatenated per-choice blocks, then the hint block when present.
struct FeatureVector {
    Vector values;
    std::size_t num_choices = 0;
    std::size_t dim = 0;
    bool hint_included = false;

    auto block(std::size_t i) const {
        return values.segment(static_cast<Eigen::Index>(i * dim), static_cast<Eigen::Index>(dim));
    }
    auto hint() const {
        return values.segment(static_cast<Eigen::Index>(num_choices * dim), static_cast<Eigen::Index>(dim));
    }
    std::size_t expected_size() const noexcept { return num_choices * dim + (hint_included ? dim : 0); }
};

/// Table lookup first, hashed fallback otherwise. A null table means
/// embedding-free mode.
class Featurizer {
public:
    explicit Featurizer(HashFeaturizer fallback, const EmbeddingTable* table = nullptr, bool use_hint = true)
        : fallback_(fallback), table_(table), use_hint_(use_hint) {
        if (table_ && table_->dim != fallback_.dim())
            throw DimMismatch("embedding dim " + std::to_string(table_->dim) + " != fallback dim " +
                              std::to_string(fallback_.dim()));
    }

    std::size_t dim() const noexcept { return fallback_.dim(); }
    bool use_hint() const noexcept { return use_hint_; }

    Vector embed(std::string_view s) const {
        if (table_)
            if (const Vector* v = table_->find(s)) return *v;
        return fallback_(s);
    }

    FeatureVector operator()(const Observation& obs) const {
        FeatureVector f;
        f.num_choices = obs.choices.size();
        f.dim = dim();
        f.hint_included = use_hint_ && obs.hint.has_value();
        f.values.resize(static_cast<Eigen::Index>(f.expected_size()));
        for (std::size_t i = 0; i < f.num_choices; ++i)
            f.values.segment(static_cast<Eigen::Index>(i * f.dim), static_cast<Eigen::Index>(f.dim)) =
                embed(obs.choices[i]);
        if (f.hint_included)
            f.values.segment(static_cast<Eigen::Index>(f.num_choices * f.dim), static_cast<Eigen::Index>(f.dim)) =
                embed(*obs.hint);
        return f;
    }

private:
    HashFeaturizer fallback_;
    const EmbeddingTable* table_;
    bool use_hint_;
};

inline FeatureVector featurize(const Observation& obs, const EmbeddingTable& table, const HashFeaturizer& fallback) {
    return Featurizer(fallback, &table)(obs);
}

} // namespace scriptworld
