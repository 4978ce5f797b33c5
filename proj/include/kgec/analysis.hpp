#pragma once

// Interpretability analyses over trained embeddings: per-entity min-max
// normalization for heatmaps, dimension purity (type entropy of the top-K%
// activated entities) and residuals of relation pairs against their class.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgec/data.hpp"
#include "kgec/log.hpp"
#include "kgec/miner.hpp"
#include "kgec/model.hpp"

namespace kgec {

struct TypeLabels {
    std::unordered_map<EntityId, std::uint32_t> type_of;
    NameTable types;

    std::size_t size() const { return type_of.size(); }

    // Labeled entity ids in increasing order.
    std::vector<EntityId> entities() const {
        std::vector<EntityId> out;
        out.reserve(type_of.size());
        for (const auto& [e, t] : type_of) out.push_back(e);
        std::sort(out.begin(), out.end());
        return out;
    }

    void set(EntityId e, std::string_view type) { type_of[e] = types.get_or_add(type); }
};

// entity_name TAB type_name. Entities missing from the vocabulary are skipped
// (with one warning); a second label for the same entity is an error.
inline TypeLabels load_type_labels(std::istream& in, const Vocab& vocab, const std::string& source = "<stream>") {
    TypeLabels labels;
    std::string line;
    std::size_t lineno = 0, skipped = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = detail::split_tabs(line);
        if (fields.size() != 2) throw ParseError(source, lineno, "expected entity<TAB>type");
        auto e = vocab.entities.find(fields[0]);
        if (!e) {
            ++skipped;
            continue;
        }
        if (labels.type_of.contains(*e))
            throw ParseError(source, lineno, "entity '" + std::string(fields[0]) + "' labeled twice");
        labels.set(*e, fields[1]);
    }
    if (skipped > 0) warn(source + ": skipped " + std::to_string(skipped) + " labels for unknown entities");
    return labels;
}

inline TypeLabels load_type_labels(const std::filesystem::path& path, const Vocab& vocab) {
    auto in = detail::open_for_read(path);
    return load_type_labels(in, vocab, path.string());
}

// (x - min) / (max - min); a constant vector maps to zeros.
inline std::vector<double> minmax_normalize(std::span<const double> x) {
    std::vector<double> out(x.size(), 0.0);
    if (x.empty()) return out;
    auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const double range = *hi - *lo;
    if (range <= 0.0) return out;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - *lo) / range;
    return out;
}

// Natural-log Shannon entropy of a count histogram.
inline double entropy(std::span<const std::size_t> counts) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log(p);
    }
    return h;
}

struct PurityPoint {
    double k_percent = 0.0;
    double mean_entropy = 0.0;  // nats
};

using PurityCurve = std::vector<PurityPoint>;

inline std::size_t top_k_count(double k_percent, std::size_t n_labeled) {
    // Tolerance keeps e.g. 5% of 120 at exactly 6.
    auto k = static_cast<std::size_t>(std::ceil(k_percent / 100.0 * static_cast<double>(n_labeled) - 1e-9));
    return std::clamp<std::size_t>(k, 1, n_labeled);
}

// Mean over dimensions of the type entropy among the top ceil(K% * labeled)
// labeled entities by activation. Ties go to the lower entity id.
inline double dimension_purity(const Matrix& component, const TypeLabels& labels, double k_percent) {
    if (!(k_percent > 0.0 && k_percent <= 100.0)) throw std::invalid_argument("dimension_purity: K must be in (0, 100]");
    auto ids = labels.entities();
    if (ids.empty()) throw std::invalid_argument("dimension_purity: no labeled entities");
    for (auto e : ids)
        if (e >= component.rows()) throw IndexError("dimension_purity: labeled entity outside the embedding matrix");
    const std::size_t k = top_k_count(k_percent, ids.size());
    std::vector<std::size_t> counts(labels.types.size());
    std::vector<EntityId> order(ids.size());
    double sum = 0.0;
    for (std::size_t l = 0; l < component.cols(); ++l) {
        order = ids;
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](EntityId a, EntityId b) {
                              const double va = component(a, l), vb = component(b, l);
                              return va != vb ? va > vb : a < b;
                          });
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < k; ++i) ++counts[labels.type_of.at(order[i])];
        sum += entropy(counts);
    }
    return sum / static_cast<double>(component.cols());
}

inline PurityCurve purity_curve(const Matrix& component, const TypeLabels& labels, std::span<const double> k_percents) {
    PurityCurve curve;
    for (double k : k_percents) curve.push_back({k, dimension_purity(component, labels, k)});
    return curve;
}

inline void write_purity_csv(std::ostream& out, const PurityCurve& curve) {
    out << "K_percent,mean_entropy_nats\n";
    auto prec = out.precision(10);
    for (const auto& p : curve) out << p.k_percent << ',' << p.mean_entropy << '\n';
    out.precision(prec);
}

// Up to `per_type` entities of each requested type, drawn with a seeded shuffle;
// rows grouped by type in the order given, ids ascending within a type.
inline std::vector<EntityId> sample_typed_entities(const TypeLabels& labels, std::span<const std::string> type_names,
                                                   std::size_t per_type, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<EntityId> out;
    auto all = labels.entities();
    for (const auto& name : type_names) {
        auto type = labels.types.at(name);
        std::vector<EntityId> members;
        for (auto e : all)
            if (labels.type_of.at(e) == type) members.push_back(e);
        std::shuffle(members.begin(), members.end(), rng);
        if (members.size() > per_type) members.resize(per_type);
        std::sort(members.begin(), members.end());
        out.insert(out.end(), members.begin(), members.end());
    }
    return out;
}

// entity,type,d0,...: each row min-max normalized over its own dimensions.
inline void write_heatmap_csv(std::ostream& out, const Matrix& component, std::span<const EntityId> rows,
                              const TypeLabels& labels, const Vocab& vocab) {
    out << "entity,type";
    for (std::size_t l = 0; l < component.cols(); ++l) out << ",d" << l;
    out << '\n';
    auto prec = out.precision(6);
    for (auto e : rows) {
        auto it = labels.type_of.find(e);
        out << vocab.entities.name(e) << ',' << (it == labels.type_of.end() ? "" : labels.types.name(it->second));
        for (double v : minmax_normalize(component.row(e))) out << ',' << v;
        out << '\n';
    }
    out.precision(prec);
}

struct PairDiagnostic {
    RelationPair pair;
    // max |r_p - r_q| (equivalence) or max |r_p - conj(r_q)| (inversion), complex modulus per entry
    double residual = 0.0;
    double re_violation = 0.0;  // max(0, max_l Re(r_p) - Re(r_q))
    double im_gap = 0.0;        // max_l |Im(r_p) - Im(r_q)|
};

inline PairDiagnostic relation_pair_diagnostic(const ModelParams& params, RelationId p, RelationId q, PairClass cls) {
    if (p >= params.num_relations() || q >= params.num_relations()) throw IndexError("relation id out of range");
    auto p_re = params.relation_re.row(p);
    auto p_im = params.relation_im.row(p);
    auto q_re = params.relation_re.row(q);
    auto q_im = params.relation_im.row(q);
    PairDiagnostic out{{p, q, cls}};
    const double conj = cls == PairClass::Inversion ? -1.0 : 1.0;
    for (std::size_t l = 0; l < p_re.size(); ++l) {
        out.residual = std::max(out.residual, std::hypot(p_re[l] - q_re[l], p_im[l] - conj * q_im[l]));
        out.re_violation = std::max(out.re_violation, p_re[l] - q_re[l]);
        out.im_gap = std::max(out.im_gap, std::abs(p_im[l] - q_im[l]));
    }
    return out;
}

inline std::vector<PairDiagnostic> diagnose_partition(const ModelParams& params, const PairPartition& part) {
    std::vector<PairDiagnostic> out;
    for (const auto& pr : part.equivalence)
        out.push_back(relation_pair_diagnostic(params, pr.first, pr.second, PairClass::Equivalence));
    for (const auto& pr : part.inversion)
        out.push_back(relation_pair_diagnostic(params, pr.first, pr.second, PairClass::Inversion));
    for (const auto& e : part.others) {
        // Inverted ordinary rules compare against conj(r_p): flip the sign of Im(r_p).
        auto d = relation_pair_diagnostic(params, e.premise, e.conclusion, PairClass::Other);
        if (e.premise_inverted) {
            d.im_gap = 0.0;
            for (std::size_t l = 0; l < params.dim(); ++l)
                d.im_gap = std::max(d.im_gap, std::abs(-params.relation_im(e.premise, l) -
                                                       params.relation_im(e.conclusion, l)));
        }
        out.push_back(d);
    }
    return out;
}

inline const char* to_string(PairClass c) {
    switch (c) {
        case PairClass::Equivalence:
            return "equivalence";
        case PairClass::Inversion:
            return "inversion";
        case PairClass::Other:
            return "others";
    }
    return "others";
}

}  // namespace kgec
