#pragma once

// Mini-batch SGD with AdaGrad, gradient-norm capping, negative sampling and
// per-step projection of entity embeddings into [0, 1]^d.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgec/checkpoint.hpp"
#include "kgec/data.hpp"
#include "kgec/evaluator.hpp"
#include "kgec/log.hpp"
#include "kgec/model.hpp"
#include "kgec/objective.hpp"

namespace kgec {

struct TrainConfig {
    std::size_t dim = 100;
    double eta = 0.01;           // L2 coefficient
    std::size_t neg_ratio = 10;  // negatives per positive
    double lr = 0.5;             // initial AdaGrad learning rate
    double mu = 0.0;             // entailment penalty coefficient
    std::size_t n_batches = 100;
    std::size_t max_iters = 1000;  // epochs
    double grad_norm_cap = 1.0;
    std::uint64_t seed = 0;
    std::size_t eval_every = 50;
    bool projection = true;
    L2Scope l2_scope = L2Scope::Batch;
    Precision precision = Precision::Float32;

    bool operator==(const TrainConfig&) const = default;
};

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void validate(const TrainConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    require(c.dim >= 1, "d must be >= 1");
    require(c.eta >= 0.0 && std::isfinite(c.eta), "eta must be >= 0");
    require(c.neg_ratio >= 1, "neg_ratio must be >= 1");
    require(c.lr > 0.0 && std::isfinite(c.lr), "lr must be > 0");
    require(c.mu >= 0.0 && std::isfinite(c.mu), "mu must be >= 0");
    require(c.n_batches >= 1, "n_batches must be >= 1");
    require(c.max_iters >= 1, "max_iters must be >= 1");
    require(c.grad_norm_cap > 0.0, "grad_norm_cap must be > 0");
    require(c.eval_every >= 1, "eval_every must be >= 1");
}

struct AdaGradState {
    ModelParams accum;
    double epsilon = 1e-8;

    AdaGradState() = default;
    explicit AdaGradState(const ModelParams& like, double eps = 1e-8)
        : accum(like.num_entities(), like.num_relations(), like.dim()), epsilon(eps) {}
};

// accum += g^2; param -= lr * g / (sqrt(accum) + eps), for touched entries only.
inline void adagrad_step(ModelParams& params, const SparseGradient& grad, AdaGradState& state, double lr) {
    auto update = [&](const RowGradients& rows, Matrix& re, Matrix& im, Matrix& acc_re, Matrix& acc_im) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto id = rows.ids()[i];
            auto apply = [&](std::span<const double> g, std::span<double> p, std::span<double> acc) {
                for (std::size_t l = 0; l < g.size(); ++l) {
                    if (g[l] == 0.0) continue;
                    acc[l] += g[l] * g[l];
                    p[l] -= lr * g[l] / (std::sqrt(acc[l]) + state.epsilon);
                }
            };
            apply(rows.re_at(i), re.row(id), acc_re.row(id));
            apply(rows.im_at(i), im.row(id), acc_im.row(id));
        }
    };
    update(grad.entities, params.entity_re, params.entity_im, state.accum.entity_re, state.accum.entity_im);
    update(grad.relations, params.relation_re, params.relation_im, state.accum.relation_re,
           state.accum.relation_im);
}

using Rng = std::mt19937_64;

// k corruptions of `positive`, each replacing exactly one of head/tail (side
// chosen uniformly) with a different, uniformly drawn entity.
inline std::vector<TrainingExample> sample_negatives(const Triple& positive, std::size_t k, std::size_t n,
                                                     Rng& rng) {
    if (n < 2) throw std::invalid_argument("sample_negatives: need at least two entities to corrupt");
    std::vector<TrainingExample> out;
    out.reserve(k);
    std::bernoulli_distribution corrupt_head(0.5);
    std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(n - 1));
    for (std::size_t i = 0; i < k; ++i) {
        Triple t = positive;
        EntityId& slot = corrupt_head(rng) ? t.head : t.tail;
        const EntityId original = slot;
        do {
            slot = pick(rng);
        } while (slot == original);
        out.push_back({t, -1});
    }
    return out;
}

// Shuffled partition into n_batches parts whose sizes differ by at most one.
inline std::vector<std::vector<Triple>> make_batches(std::span<const Triple> train, std::size_t n_batches, Rng& rng) {
    if (n_batches == 0) throw std::invalid_argument("make_batches: n_batches must be >= 1");
    if (n_batches > train.size())
        warn("make_batches: " + std::to_string(n_batches) + " batches for " + std::to_string(train.size()) +
             " triples; some batches are empty");
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<Triple>> batches(n_batches);
    const std::size_t base = train.size() / n_batches;
    const std::size_t extra = train.size() % n_batches;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t size = base + (b < extra ? 1 : 0);
        batches[b].reserve(size);
        for (std::size_t i = 0; i < size; ++i) batches[b].push_back(train[order[pos++]]);
    }
    return batches;
}

// Rescales so the global L2 norm is at most `cap`. Returns the pre-scaling norm.
inline double cap_gradient_norm(SparseGradient& grad, double cap) {
    const double norm = grad.norm();
    if (norm > cap) grad.scale(cap / norm);
    return norm;
}

struct EpochLog {
    std::size_t epoch = 0;
    LossBreakdown loss;
    std::optional<double> valid_mrr;
};

struct TrainResult {
    ModelParams best;  // best validation MRR (or final params when there is no validation split)
    ModelParams last;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    std::optional<double> best_valid_mrr;
};

class TrainingError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainHooks {
    // Called after every parameter update (and projection).
    std::function<void(const ModelParams&, std::size_t epoch, std::size_t batch)> on_step;
    std::function<void(const EpochLog&)> on_epoch;
    unsigned eval_workers = 1;
};

inline TrainResult train(const Dataset& ds, std::span<const Entailment> ents, const TrainConfig& config,
                         const TrainHooks& hooks = {}) {
    validate(config);
    if (ds.train.empty()) throw std::invalid_argument("train: empty training split");
    for (const auto& e : ents) {
        validate(e);
        if (e.premise >= ds.num_relations() || e.conclusion >= ds.num_relations())
            throw IndexError("entailment refers to an unknown relation");
    }
    const std::size_t n = ds.num_entities();
    // With mu = 0 the entailments do not enter the objective at all.
    const std::span<const Entailment> active = config.mu > 0.0 ? ents : std::span<const Entailment>{};

    TrainResult result;
    ModelParams params = init_params(n, ds.num_relations(), config.dim, config.seed);
    AdaGradState state(params);
    Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    const bool have_valid = !ds.valid.empty();
    std::optional<KnownIndex> known;
    if (have_valid) known = build_known_index(ds);

    std::vector<TrainingExample> examples;
    for (std::size_t epoch = 1; epoch <= config.max_iters; ++epoch) {
        EpochLog entry;
        entry.epoch = epoch;
        auto batches = make_batches(ds.train, config.n_batches, rng);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            if (batches[b].empty()) continue;
            examples.clear();
            for (const auto& pos : batches[b]) {
                examples.push_back({pos, +1});
                auto negs = sample_negatives(pos, config.neg_ratio, n, rng);
                examples.insert(examples.end(), negs.begin(), negs.end());
            }
            auto lg = loss_and_gradient(params, examples, active, config.mu, config.eta, config.l2_scope);
            if (!std::isfinite(lg.loss.total))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b) + " (logistic=" + std::to_string(lg.loss.logistic) +
                                    ", penalty=" + std::to_string(lg.loss.entailment_penalty) +
                                    ", l2=" + std::to_string(lg.loss.l2) + ")");
            entry.loss += lg.loss;
            cap_gradient_norm(lg.grad, config.grad_norm_cap);
            adagrad_step(params, lg.grad, state, config.lr);
            if (config.projection) project_entity_rows(params, lg.grad.entities.ids());
            if (hooks.on_step) hooks.on_step(params, epoch, b);
        }

        if (have_valid && (epoch % config.eval_every == 0 || epoch == config.max_iters)) {
            auto eval = evaluate(params, ds.valid, *known, {.workers = hooks.eval_workers});
            entry.valid_mrr = eval.mrr;
            if (!result.best_valid_mrr || eval.mrr > *result.best_valid_mrr) {
                result.best_valid_mrr = eval.mrr;
                result.best_epoch = epoch;
                result.best = params;
            }
        }
        if (hooks.on_epoch) hooks.on_epoch(entry);
        result.log.push_back(entry);
    }
    if (!have_valid) {
        result.best = params;
        result.best_epoch = config.max_iters;
    }
    result.last = std::move(params);
    return result;
}

}  // namespace kgec
