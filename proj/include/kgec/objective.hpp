#pragma once

// Penalty-form training objective:
//
//   sum_{D+ u D-} log(1 + exp(-y * phi))
//     + mu  * sum_T lambda * ( 1'[Re(r_p*) - Re(r_q)]_+ + 1'(Im(r_p*) - Im(r_q))^2 )
//     + eta * ||rows touched||^2
//
// r_p* is conj(r_p) when the premise is inverted.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgec/data.hpp"
#include "kgec/model.hpp"

namespace kgec {

struct TrainingExample {
    Triple triple;
    int label = 1;  // +1 observed, -1 corrupted
};

struct LossBreakdown {
    double logistic = 0.0;
    double entailment_penalty = 0.0;  // unweighted
    double l2 = 0.0;                  // unweighted
    double total = 0.0;               // logistic + mu * penalty + eta * l2

    LossBreakdown& operator+=(const LossBreakdown& o) {
        logistic += o.logistic;
        entailment_penalty += o.entailment_penalty;
        l2 += o.l2;
        total += o.total;
        return *this;
    }
};

enum class L2Scope { Batch, Full };

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logistic_term(const ModelParams& params, std::span<const TrainingExample> examples) {
    double sum = 0.0;
    for (const auto& ex : examples) sum += softplus(-ex.label * score_triple(params, ex.triple));
    return sum;
}

inline double entailment_penalty(const ModelParams& params, std::span<const Entailment> ents) {
    double sum = 0.0;
    for (const auto& e : ents) {
        auto p_re = params.relation_re.row(e.premise);
        auto p_im = params.relation_im.row(e.premise);
        auto q_re = params.relation_re.row(e.conclusion);
        auto q_im = params.relation_im.row(e.conclusion);
        const double sign = e.premise_inverted ? -1.0 : 1.0;
        double hinge = 0.0, sq = 0.0;
        for (std::size_t l = 0; l < p_re.size(); ++l) {
            hinge += std::max(0.0, p_re[l] - q_re[l]);
            double diff = sign * p_im[l] - q_im[l];
            sq += diff * diff;
        }
        sum += e.lambda * (hinge + sq);
    }
    return sum;
}

// Rows whose parameters a mini-batch step reads or regularizes.
struct TouchedRows {
    std::vector<EntityId> entities;
    std::vector<RelationId> relations;
};

inline TouchedRows touched_rows(std::span<const TrainingExample> batch, std::span<const Entailment> ents) {
    std::unordered_set<std::uint32_t> seen_e, seen_r;
    TouchedRows rows;
    auto add = [](std::unordered_set<std::uint32_t>& seen, std::vector<std::uint32_t>& out, std::uint32_t id) {
        if (seen.insert(id).second) out.push_back(id);
    };
    for (const auto& ex : batch) {
        add(seen_e, rows.entities, ex.triple.head);
        add(seen_e, rows.entities, ex.triple.tail);
        add(seen_r, rows.relations, ex.triple.rel);
    }
    for (const auto& e : ents) {
        add(seen_r, rows.relations, e.premise);
        add(seen_r, rows.relations, e.conclusion);
    }
    return rows;
}

inline double l2_term(const ModelParams& params, const TouchedRows& rows) {
    auto sq = [](std::span<const double> xs) {
        double s = 0.0;
        for (double x : xs) s += x * x;
        return s;
    };
    double sum = 0.0;
    for (auto e : rows.entities) sum += sq(params.entity_re.row(e)) + sq(params.entity_im.row(e));
    for (auto r : rows.relations) sum += sq(params.relation_re.row(r)) + sq(params.relation_im.row(r));
    return sum;
}

inline double l2_term_full(const ModelParams& params) {
    double sum = 0.0;
    for (const Matrix* m : {&params.entity_re, &params.entity_im, &params.relation_re, &params.relation_im})
        for (double x : m->data()) sum += x * x;
    return sum;
}

// Gradient rows for one embedding table, keyed by id, in first-touch order.
class RowGradients {
   public:
    explicit RowGradients(std::size_t dim = 0) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool contains(std::uint32_t id) const { return slot_.contains(id); }
    std::span<const std::uint32_t> ids() const { return ids_; }

    std::span<double> re(std::uint32_t id) {
        const std::size_t slot = ensure(id);
        return {re_.data() + slot * dim_, dim_};
    }
    std::span<double> im(std::uint32_t id) {
        const std::size_t slot = ensure(id);
        return {im_.data() + slot * dim_, dim_};
    }

    std::span<const double> re_at(std::size_t i) const { return {re_.data() + i * dim_, dim_}; }
    std::span<const double> im_at(std::size_t i) const { return {im_.data() + i * dim_, dim_}; }
    std::span<double> re_at(std::size_t i) { return {re_.data() + i * dim_, dim_}; }
    std::span<double> im_at(std::size_t i) { return {im_.data() + i * dim_, dim_}; }

    // Empty span for untouched rows.
    std::span<const double> find_re(std::uint32_t id) const {
        auto it = slot_.find(id);
        return it == slot_.end() ? std::span<const double>{} : re_at(it->second);
    }
    std::span<const double> find_im(std::uint32_t id) const {
        auto it = slot_.find(id);
        return it == slot_.end() ? std::span<const double>{} : im_at(it->second);
    }

    double squared_norm() const {
        double s = 0.0;
        for (double g : re_) s += g * g;
        for (double g : im_) s += g * g;
        return s;
    }

    void scale(double c) {
        for (double& g : re_) g *= c;
        for (double& g : im_) g *= c;
    }

   private:
    std::size_t ensure(std::uint32_t id) {
        auto [it, inserted] = slot_.try_emplace(id, ids_.size());
        if (inserted) {
            ids_.push_back(id);
            re_.resize(re_.size() + dim_, 0.0);
            im_.resize(im_.size() + dim_, 0.0);
        }
        return it->second;
    }

    std::size_t dim_;
    std::unordered_map<std::uint32_t, std::size_t> slot_;
    std::vector<std::uint32_t> ids_;
    std::vector<double> re_;
    std::vector<double> im_;
};

struct SparseGradient {
    RowGradients entities;
    RowGradients relations;

    explicit SparseGradient(std::size_t dim = 0) : entities(dim), relations(dim) {}

    double norm() const { return std::sqrt(entities.squared_norm() + relations.squared_norm()); }
    void scale(double c) {
        entities.scale(c);
        relations.scale(c);
    }
};

namespace detail {

inline void add_scaled(std::span<double> dst, std::span<const double> src, double c) {
    for (std::size_t l = 0; l < dst.size(); ++l) dst[l] += c * src[l];
}

// Accumulates coeff * d(phi)/d(theta) for one triple.
inline void add_score_gradient(const ModelParams& params, const Triple& t, double coeff, SparseGradient& grad) {
    auto a = params.entity_re.row(t.head);
    auto b = params.entity_im.row(t.head);
    auto c = params.relation_re.row(t.rel);
    auto s = params.relation_im.row(t.rel);
    auto x = params.entity_re.row(t.tail);
    auto y = params.entity_im.row(t.tail);
    const std::size_t d = a.size();
    {
        auto g_re = grad.entities.re(t.head);
        auto g_im = grad.entities.im(t.head);
        for (std::size_t l = 0; l < d; ++l) {
            g_re[l] += coeff * (c[l] * x[l] + s[l] * y[l]);
            g_im[l] += coeff * (c[l] * y[l] - s[l] * x[l]);
        }
    }
    {
        auto g_re = grad.relations.re(t.rel);
        auto g_im = grad.relations.im(t.rel);
        for (std::size_t l = 0; l < d; ++l) {
            g_re[l] += coeff * (a[l] * x[l] + b[l] * y[l]);
            g_im[l] += coeff * (a[l] * y[l] - b[l] * x[l]);
        }
    }
    {
        auto g_re = grad.entities.re(t.tail);
        auto g_im = grad.entities.im(t.tail);
        for (std::size_t l = 0; l < d; ++l) {
            g_re[l] += coeff * (a[l] * c[l] - b[l] * s[l]);
            g_im[l] += coeff * (b[l] * c[l] + a[l] * s[l]);
        }
    }
}

}  // namespace detail

struct LossAndGradient {
    LossBreakdown loss;
    SparseGradient grad;
};

// Batch loss (unnormalized sum) and its exact gradient. Subgradient of [x]_+ at 0 is 0.
inline LossAndGradient loss_and_gradient(const ModelParams& params, std::span<const TrainingExample> batch,
                                         std::span<const Entailment> ents, double mu, double eta,
                                         L2Scope scope = L2Scope::Batch) {
    LossAndGradient out{{}, SparseGradient(params.dim())};
    auto& grad = out.grad;
    auto& loss = out.loss;

    for (const auto& ex : batch) {
        check_ids(params, ex.triple);
        const double margin = -ex.label * score_triple(params, ex.triple);
        loss.logistic += softplus(margin);
        // d softplus(-y phi) / d phi = -y * sigmoid(-y phi)
        detail::add_score_gradient(params, ex.triple, -ex.label * sigmoid(margin), grad);
    }

    for (const auto& e : ents) {
        auto p_re = params.relation_re.row(e.premise);
        auto p_im = params.relation_im.row(e.premise);
        auto q_re = params.relation_re.row(e.conclusion);
        auto q_im = params.relation_im.row(e.conclusion);
        const double sign = e.premise_inverted ? -1.0 : 1.0;
        const std::size_t d = p_re.size();
        double hinge = 0.0, sq = 0.0;
        // Both rows are touched even when the constraint is inactive.
        grad.relations.re(e.premise);
        grad.relations.re(e.conclusion);
        auto gp_re = grad.relations.re(e.premise);
        auto gp_im = grad.relations.im(e.premise);
        auto gq_re = grad.relations.re(e.conclusion);
        auto gq_im = grad.relations.im(e.conclusion);
        const double w = mu * e.lambda;
        for (std::size_t l = 0; l < d; ++l) {
            const double dre = p_re[l] - q_re[l];
            const double dim = sign * p_im[l] - q_im[l];
            hinge += std::max(0.0, dre);
            sq += dim * dim;
            if (dre > 0.0) {
                gp_re[l] += w;
                gq_re[l] -= w;
            }
            gp_im[l] += w * 2.0 * dim * sign;
            gq_im[l] -= w * 2.0 * dim;
        }
        loss.entailment_penalty += e.lambda * (hinge + sq);
    }

    auto add_l2 = [&](RowGradients& g, const Matrix& re, const Matrix& im, std::uint32_t id) {
        detail::add_scaled(g.re(id), re.row(id), 2.0 * eta);
        detail::add_scaled(g.im(id), im.row(id), 2.0 * eta);
    };
    if (scope == L2Scope::Batch) {
        auto rows = touched_rows(batch, ents);
        loss.l2 = l2_term(params, rows);
        for (auto e : rows.entities) add_l2(grad.entities, params.entity_re, params.entity_im, e);
        for (auto r : rows.relations) add_l2(grad.relations, params.relation_re, params.relation_im, r);
    } else {
        loss.l2 = l2_term_full(params);
        for (std::uint32_t e = 0; e < params.num_entities(); ++e)
            add_l2(grad.entities, params.entity_re, params.entity_im, e);
        for (std::uint32_t r = 0; r < params.num_relations(); ++r)
            add_l2(grad.relations, params.relation_re, params.relation_im, r);
    }

    loss.total = loss.logistic + mu * loss.entailment_penalty + eta * loss.l2;
    return out;
}

}  // namespace kgec
