#pragma once

// Triple datasets, vocabularies, the filtered-setting index and entailment files.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgec/log.hpp"

namespace kgec {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

class ParseError : public std::runtime_error {
   public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

   private:
    std::size_t line_;
};

class VocabError : public std::runtime_error {
   public:
    explicit VocabError(const std::string& token)
        : std::runtime_error("unknown name '" + token + "'"), token_(token) {}
    const std::string& token() const { return token_; }

   private:
    std::string token_;
};

class RangeError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense name <-> id table. Ids follow first-seen order.
class NameTable {
   public:
    std::size_t size() const { return names_.size(); }
    bool empty() const { return names_.empty(); }

    std::optional<std::uint32_t> find(std::string_view name) const {
        auto it = ids_.find(std::string(name));
        if (it == ids_.end()) return std::nullopt;
        return it->second;
    }

    std::uint32_t at(std::string_view name) const {
        auto id = find(name);
        if (!id) throw VocabError(std::string(name));
        return *id;
    }

    std::uint32_t get_or_add(std::string_view name) {
        auto [it, inserted] = ids_.try_emplace(std::string(name), static_cast<std::uint32_t>(names_.size()));
        if (inserted) names_.emplace_back(name);
        return it->second;
    }

    const std::string& name(std::uint32_t id) const { return names_.at(id); }
    const std::vector<std::string>& names() const { return names_; }

    bool operator==(const NameTable& other) const { return names_ == other.names_; }

   private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

struct Vocab {
    NameTable entities;
    NameTable relations;

    bool operator==(const Vocab&) const = default;
};

struct Triple {
    EntityId head = 0;
    RelationId rel = 0;
    EntityId tail = 0;

    auto operator<=>(const Triple&) const = default;
};

struct Dataset {
    std::vector<Triple> train;
    std::vector<Triple> valid;
    std::vector<Triple> test;
    Vocab vocab;

    std::size_t num_entities() const { return vocab.entities.size(); }
    std::size_t num_relations() const { return vocab.relations.size(); }
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    return in;
}

}  // namespace detail

// Reads head<TAB>relation<TAB>tail lines. Empty lines are skipped.
// With grow=false every name must already be in `vocab`.
inline std::vector<Triple> load_triples(std::istream& in, Vocab& vocab, bool grow,
                                        const std::string& source = "<stream>") {
    std::vector<Triple> triples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = detail::split_tabs(line);
        if (fields.size() != 3)
            throw ParseError(source, lineno, "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
        Triple t;
        if (grow) {
            t.head = vocab.entities.get_or_add(fields[0]);
            t.rel = vocab.relations.get_or_add(fields[1]);
            t.tail = vocab.entities.get_or_add(fields[2]);
        } else {
            t.head = vocab.entities.at(fields[0]);
            t.rel = vocab.relations.at(fields[1]);
            t.tail = vocab.entities.at(fields[2]);
        }
        triples.push_back(t);
    }
    return triples;
}

inline std::vector<Triple> load_triples(const std::filesystem::path& path, Vocab& vocab, bool grow) {
    auto in = detail::open_for_read(path);
    return load_triples(in, vocab, grow, path.string());
}

inline void write_triples(std::ostream& out, std::span<const Triple> triples, const Vocab& vocab) {
    for (const auto& t : triples)
        out << vocab.entities.name(t.head) << '\t' << vocab.relations.name(t.rel) << '\t'
            << vocab.entities.name(t.tail) << '\n';
}

inline void write_triples(const std::filesystem::path& path, std::span<const Triple> triples, const Vocab& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    write_triples(out, triples, vocab);
}

// One name per line; line number (0-based) is the id.
inline void write_names(const std::filesystem::path& path, const NameTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    for (const auto& name : table.names()) out << name << '\n';
}

inline NameTable read_names(const std::filesystem::path& path) {
    auto in = detail::open_for_read(path);
    NameTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (table.get_or_add(line) != lineno - 1) throw ParseError(path.string(), lineno, "duplicate name '" + line + "'");
    }
    return table;
}

namespace detail {

inline std::filesystem::path split_file(const std::filesystem::path& dir, const std::string& split) {
    for (const char* ext : {".txt", ".tsv"}) {
        auto p = dir / (split + ext);
        if (std::filesystem::exists(p)) return p;
    }
    throw std::runtime_error("missing split '" + split + "' in '" + dir.string() + "' (expected " + split +
                             ".txt or " + split + ".tsv)");
}

inline void warn_unseen_in_train(const std::vector<Triple>& split, const std::string& split_name,
                                 std::size_t train_entities, std::size_t train_relations, const Vocab& vocab) {
    std::unordered_set<std::uint32_t> ents, rels;
    for (const auto& t : split) {
        if (t.head >= train_entities) ents.insert(t.head);
        if (t.tail >= train_entities) ents.insert(t.tail);
        if (t.rel >= train_relations) rels.insert(t.rel);
    }
    if (ents.empty() && rels.empty()) return;
    std::string msg = split_name + ": " + std::to_string(ents.size()) + " entities and " +
                      std::to_string(rels.size()) + " relations absent from train (embeddings stay untrained)";
    if (!ents.empty()) {
        auto first = *std::min_element(ents.begin(), ents.end());
        msg += ", e.g. '" + vocab.entities.name(first) + "'";
    }
    warn(msg);
}

}  // namespace detail

// Loads train/valid/test from a directory. Vocabulary grows in file order,
// train first; names first seen in valid/test trigger a warning.
inline Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    ds.train = load_triples(detail::split_file(dir, "train"), ds.vocab, true);
    const auto n_train = ds.vocab.entities.size();
    const auto m_train = ds.vocab.relations.size();
    ds.valid = load_triples(detail::split_file(dir, "valid"), ds.vocab, true);
    ds.test = load_triples(detail::split_file(dir, "test"), ds.vocab, true);
    detail::warn_unseen_in_train(ds.valid, "valid", n_train, m_train, ds.vocab);
    detail::warn_unseen_in_train(ds.test, "test", n_train, m_train, ds.vocab);
    return ds;
}

// Loads the splits against a fixed vocabulary (e.g. the one stored with a checkpoint).
inline Dataset load_dataset(const std::filesystem::path& dir, Vocab vocab) {
    Dataset ds;
    ds.vocab = std::move(vocab);
    ds.train = load_triples(detail::split_file(dir, "train"), ds.vocab, false);
    ds.valid = load_triples(detail::split_file(dir, "valid"), ds.vocab, false);
    ds.test = load_triples(detail::split_file(dir, "test"), ds.vocab, false);
    return ds;
}

// Set of all known triples, with (?, r, t) and (h, r, ?) lookups.
class KnownIndex {
   public:
    KnownIndex() = default;

    explicit KnownIndex(std::initializer_list<std::span<const Triple>> splits) {
        for (auto split : splits)
            for (const auto& t : split) insert(t);
        for (auto& [key, v] : heads_) normalize(v);
        for (auto& [key, v] : tails_) normalize(v);
    }

    bool contains(const Triple& t) const { return triples_.contains(pack(t)); }
    bool contains(EntityId h, RelationId r, EntityId t) const { return contains(Triple{h, r, t}); }

    // Sorted, deduplicated heads h with (h, rel, tail) known.
    std::span<const EntityId> heads(RelationId rel, EntityId tail) const { return lookup(heads_, rel, tail); }
    // Sorted, deduplicated tails t with (head, rel, t) known.
    std::span<const EntityId> tails(EntityId head, RelationId rel) const { return lookup(tails_, rel, head); }

    std::size_t size() const { return triples_.size(); }
    bool empty() const { return triples_.empty(); }

   private:
    static constexpr std::uint64_t kEntityLimit = std::uint64_t{1} << 24;
    static constexpr std::uint64_t kRelationLimit = std::uint64_t{1} << 16;

    static std::uint64_t pack(const Triple& t) {
        if (t.head >= kEntityLimit || t.tail >= kEntityLimit || t.rel >= kRelationLimit)
            throw RangeError("KnownIndex supports at most 2^24 entities and 2^16 relations");
        return (std::uint64_t{t.head} << 40) | (std::uint64_t{t.rel} << 24) | t.tail;
    }
    static std::uint64_t pack_pair(RelationId rel, EntityId e) { return (std::uint64_t{rel} << 32) | e; }

    static void normalize(std::vector<EntityId>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    static std::span<const EntityId> lookup(const std::unordered_map<std::uint64_t, std::vector<EntityId>>& map,
                                            RelationId rel, EntityId e) {
        auto it = map.find(pack_pair(rel, e));
        if (it == map.end()) return {};
        return it->second;
    }

    void insert(const Triple& t) {
        triples_.insert(pack(t));
        heads_[pack_pair(t.rel, t.tail)].push_back(t.head);
        tails_[pack_pair(t.rel, t.head)].push_back(t.tail);
    }

    std::unordered_set<std::uint64_t> triples_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> heads_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
};

inline KnownIndex build_known_index(const Dataset& ds) { return KnownIndex{ds.train, ds.valid, ds.test}; }

// r_p ->lambda r_q, where the premise may be the inverse relation r_p^-1.
struct Entailment {
    RelationId premise = 0;
    bool premise_inverted = false;
    RelationId conclusion = 0;
    double lambda = 1.0;

    bool operator==(const Entailment&) const = default;
};

inline constexpr std::string_view kInverseSuffix = "^-1";

inline void validate(const Entailment& e) {
    if (!(e.lambda > 0.0 && e.lambda <= 1.0))
        throw RangeError("entailment confidence " + std::to_string(e.lambda) + " outside (0, 1]");
    if (!e.premise_inverted && e.premise == e.conclusion)
        throw RangeError("entailment premise equals its conclusion");
}

inline std::vector<Entailment> load_entailments(std::istream& in, const Vocab& vocab,
                                                const std::string& source = "<stream>") {
    std::vector<Entailment> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = detail::split_tabs(line);
        if (fields.size() != 3)
            throw ParseError(source, lineno, "expected premise<TAB>conclusion<TAB>lambda");
        Entailment e;
        std::string_view premise = fields[0];
        if (premise.size() > kInverseSuffix.size() && premise.ends_with(kInverseSuffix)) {
            e.premise_inverted = true;
            premise.remove_suffix(kInverseSuffix.size());
        }
        e.premise = vocab.relations.at(premise);
        e.conclusion = vocab.relations.at(fields[1]);
        auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), e.lambda);
        if (ec != std::errc() || ptr != fields[2].data() + fields[2].size())
            throw ParseError(source, lineno, "bad confidence '" + std::string(fields[2]) + "'");
        try {
            validate(e);
        } catch (const RangeError& err) {
            throw RangeError(source + ":" + std::to_string(lineno) + ": " + err.what());
        }
        out.push_back(e);
    }
    return out;
}

inline std::vector<Entailment> load_entailments(const std::filesystem::path& path, const Vocab& vocab) {
    auto in = detail::open_for_read(path);
    return load_entailments(in, vocab, path.string());
}

inline std::string premise_name(const Entailment& e, const Vocab& vocab) {
    auto name = vocab.relations.name(e.premise);
    if (e.premise_inverted) name += kInverseSuffix;
    return name;
}

}  // namespace kgec
