#pragma once

// Length-1 rule mining (p -> q and p^-1 -> q) with PCA confidence, and the
// equivalence / inversion heuristics built on top of mined rules.

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgec/data.hpp"

namespace kgec {

struct MinedRule {
    Entailment entailment;
    std::uint64_t support = 0;   // |{(x,y): p(x,y) and q(x,y)}|
    std::uint64_t pca_body = 0;  // |{(x,y): p(x,y) and exists y' q(x,y')}|
    double pca_confidence = 0.0;

    bool operator==(const MinedRule&) const = default;
};

struct MinerOptions {
    double min_conf = 0.8;
    std::uint64_t min_support = 10;
};

namespace detail {

inline std::uint64_t pair_key(EntityId x, EntityId y) { return (std::uint64_t{x} << 32) | y; }

}  // namespace detail

// For every signed premise p in {r, r^-1} and conclusion q != p, counts
// support and PCA body over distinct pairs and keeps rules with
// confidence > min_conf (>= when min_conf is 1) and support >= min_support.
// Output is sorted by (premise, inverted, conclusion).
inline std::vector<MinedRule> mine_entailments(std::span<const Triple> train, MinerOptions options = {}) {
    if (!(options.min_conf > 0.0 && options.min_conf <= 1.0))
        throw std::invalid_argument("mine_entailments: min_conf must be in (0, 1]");

    RelationId num_rel = 0;
    for (const auto& t : train) num_rel = std::max<RelationId>(num_rel, t.rel + 1);

    // Distinct (x, y) pairs per relation; relations holding each pair; relations per subject.
    std::vector<std::vector<std::pair<EntityId, EntityId>>> pairs(num_rel);
    std::unordered_map<std::uint64_t, std::vector<RelationId>> rels_of_pair;
    std::unordered_map<EntityId, std::vector<RelationId>> rels_of_subject;
    {
        std::vector<std::unordered_set<std::uint64_t>> seen(num_rel);
        for (const auto& t : train) {
            if (!seen[t.rel].insert(detail::pair_key(t.head, t.tail)).second) continue;
            pairs[t.rel].emplace_back(t.head, t.tail);
            rels_of_pair[detail::pair_key(t.head, t.tail)].push_back(t.rel);
            rels_of_subject[t.head].push_back(t.rel);
        }
        for (auto& [k, v] : rels_of_subject) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
    }

    std::vector<MinedRule> rules;
    std::vector<std::uint64_t> support(num_rel), body(num_rel);
    for (RelationId p = 0; p < num_rel; ++p) {
        for (bool inverted : {false, true}) {
            std::fill(support.begin(), support.end(), 0);
            std::fill(body.begin(), body.end(), 0);
            for (auto [a, b] : pairs[p]) {
                // premise holds for (x, y)
                const EntityId x = inverted ? b : a;
                const EntityId y = inverted ? a : b;
                if (auto it = rels_of_pair.find(detail::pair_key(x, y)); it != rels_of_pair.end())
                    for (RelationId q : it->second) ++support[q];
                if (auto it = rels_of_subject.find(x); it != rels_of_subject.end())
                    for (RelationId q : it->second) ++body[q];
            }
            for (RelationId q = 0; q < num_rel; ++q) {
                if (!inverted && q == p) continue;
                if (support[q] == 0 || support[q] < options.min_support) continue;
                const double conf = static_cast<double>(support[q]) / static_cast<double>(body[q]);
                const bool keep = conf > options.min_conf || (options.min_conf == 1.0 && conf == 1.0);
                if (!keep) continue;
                rules.push_back({{p, inverted, q, conf}, support[q], body[q], conf});
            }
        }
    }
    std::sort(rules.begin(), rules.end(), [](const MinedRule& l, const MinedRule& r) {
        return std::tie(l.entailment.premise, l.entailment.premise_inverted, l.entailment.conclusion) <
               std::tie(r.entailment.premise, r.entailment.premise_inverted, r.entailment.conclusion);
    });
    return rules;
}

enum class PairClass { Equivalence, Inversion, Other };

struct RelationPair {
    RelationId first = 0;
    RelationId second = 0;
    PairClass cls = PairClass::Other;

    bool operator==(const RelationPair&) const = default;
};

struct PairPartition {
    std::vector<RelationPair> equivalence;  // first < second
    std::vector<RelationPair> inversion;    // first <= second
    std::vector<Entailment> others;         // rules in neither class
};

// r_p, r_q equivalent: p -> q and q -> p, both with lambda > thresh.
// r_p inverse of r_q: p^-1 -> q and q^-1 -> p, both with lambda > thresh.
inline PairPartition classify_pairs(std::span<const Entailment> rules, double thresh) {
    if (!(thresh > 0.0 && thresh < 1.0)) throw std::invalid_argument("classify_pairs: thresh must be in (0, 1)");
    std::map<std::tuple<RelationId, bool, RelationId>, double> strength;
    for (const auto& r : rules) {
        auto key = std::make_tuple(r.premise, r.premise_inverted, r.conclusion);
        strength[key] = std::max(strength[key], r.lambda);
    }
    auto strong = [&](RelationId p, bool inv, RelationId q) {
        auto it = strength.find({p, inv, q});
        return it != strength.end() && it->second > thresh;
    };

    PairPartition out;
    std::set<std::tuple<RelationId, bool, RelationId>> claimed;
    for (const auto& [key, lambda] : strength) {
        auto [p, inv, q] = key;
        if (p > q) continue;
        if (!inv && p != q && strong(p, false, q) && strong(q, false, p)) {
            out.equivalence.push_back({p, q, PairClass::Equivalence});
            claimed.insert({p, false, q});
            claimed.insert({q, false, p});
        }
        if (inv && strong(p, true, q) && strong(q, true, p)) {
            out.inversion.push_back({p, q, PairClass::Inversion});
            claimed.insert({p, true, q});
            claimed.insert({q, true, p});
        }
    }
    for (const auto& r : rules)
        if (!claimed.contains({r.premise, r.premise_inverted, r.conclusion})) out.others.push_back(r);
    return out;
}

inline std::vector<Entailment> to_entailments(std::span<const MinedRule> rules) {
    std::vector<Entailment> out;
    out.reserve(rules.size());
    for (const auto& r : rules) out.push_back(r.entailment);
    return out;
}

// premise[^-1] TAB conclusion TAB lambda, as read by load_entailments.
inline void write_entailments(std::ostream& out, std::span<const Entailment> ents, const Vocab& vocab) {
    auto flags = out.flags();
    auto prec = out.precision(17);
    for (const auto& e : ents)
        out << premise_name(e, vocab) << '\t' << vocab.relations.name(e.conclusion) << '\t' << e.lambda << '\n';
    out.precision(prec);
    out.flags(flags);
}

inline void write_rule_diagnostics(std::ostream& out, std::span<const MinedRule> rules, const Vocab& vocab) {
    out << "premise,conclusion,support,pca_body,pca_confidence\n";
    auto prec = out.precision(17);
    for (const auto& r : rules)
        out << premise_name(r.entailment, vocab) << ',' << vocab.relations.name(r.entailment.conclusion) << ','
            << r.support << ',' << r.pca_body << ',' << r.pca_confidence << '\n';
    out.precision(prec);
}

}  // namespace kgec
