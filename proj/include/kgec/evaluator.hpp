#pragma once

// Filtered link-prediction ranking (MRR, HITS@N) and paired t-tests between runs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "kgec/data.hpp"
#include "kgec/model.hpp"

namespace kgec {

enum class Side { Head, Tail };

struct RankPair {
    std::uint64_t head_rank = 1;
    std::uint64_t tail_rank = 1;
};

struct EvalResult {
    std::vector<RankPair> per_triple;
    double mrr = 0.0;
    std::map<int, double> hits;  // n -> fraction of ranks <= n
};

inline constexpr std::array<int, 3> kHitsAt = {1, 3, 10};

namespace detail {

// Scores every candidate replacement on one side of `t`. The gold triple's
// score is scores[gold entity].
inline void candidate_scores(const ModelParams& params, const Triple& t, Side side, std::vector<double>& scores,
                             std::vector<double>& w_re, std::vector<double>& w_im) {
    const std::size_t d = params.dim();
    const std::size_t n = params.num_entities();
    w_re.assign(d, 0.0);
    w_im.assign(d, 0.0);
    auto c = params.relation_re.row(t.rel);
    auto s = params.relation_im.row(t.rel);
    if (side == Side::Tail) {
        // phi(h, r, e) = sum Re(h r) Re(e) + Im(h r) Im(e)
        auto a = params.entity_re.row(t.head);
        auto b = params.entity_im.row(t.head);
        for (std::size_t l = 0; l < d; ++l) {
            w_re[l] = a[l] * c[l] - b[l] * s[l];
            w_im[l] = b[l] * c[l] + a[l] * s[l];
        }
    } else {
        // phi(e, r, t) = sum Re(e) Re(r conj(t)) - Im(e) Im(r conj(t))
        auto x = params.entity_re.row(t.tail);
        auto y = params.entity_im.row(t.tail);
        for (std::size_t l = 0; l < d; ++l) {
            w_re[l] = c[l] * x[l] + s[l] * y[l];
            w_im[l] = c[l] * y[l] - s[l] * x[l];
        }
    }
    scores.resize(n);
    for (std::size_t e = 0; e < n; ++e) {
        auto er = params.entity_re.row(e);
        auto ei = params.entity_im.row(e);
        double sum = 0.0;
        for (std::size_t l = 0; l < d; ++l) sum += w_re[l] * er[l] + w_im[l] * ei[l];
        scores[e] = sum;
    }
}

inline std::uint64_t rank_from_scores(std::span<const double> scores, EntityId gold,
                                      std::span<const EntityId> known_alternatives, bool filtered) {
    const double gold_score = scores[gold];
    std::uint64_t rank = 1;
    for (std::size_t e = 0; e < scores.size(); ++e)
        if (scores[e] > gold_score) ++rank;
    if (filtered) {
        for (EntityId e : known_alternatives)
            if (e != gold && scores[e] > gold_score) --rank;
    }
    return rank;
}

}  // namespace detail

// 1 + number of non-gold candidates scoring strictly higher than the gold
// triple, skipping candidates that form a known triple.
inline std::uint64_t filtered_rank(const ModelParams& params, const Triple& t, Side side, const KnownIndex& known,
                                   bool filtered = true) {
    check_ids(params, t);
    std::vector<double> scores, w_re, w_im;
    detail::candidate_scores(params, t, side, scores, w_re, w_im);
    if (side == Side::Head) return detail::rank_from_scores(scores, t.head, known.heads(t.rel, t.tail), filtered);
    return detail::rank_from_scores(scores, t.tail, known.tails(t.head, t.rel), filtered);
}

inline void aggregate(EvalResult& result) {
    double rr = 0.0;
    std::map<int, std::uint64_t> hit_counts;
    for (int n : kHitsAt) hit_counts[n] = 0;
    for (const auto& rp : result.per_triple) {
        for (auto rank : {rp.head_rank, rp.tail_rank}) {
            rr += 1.0 / static_cast<double>(rank);
            for (int n : kHitsAt)
                if (rank <= static_cast<std::uint64_t>(n)) ++hit_counts[n];
        }
    }
    const double total = 2.0 * static_cast<double>(result.per_triple.size());
    result.mrr = rr / total;
    result.hits.clear();
    for (int n : kHitsAt) result.hits[n] = static_cast<double>(hit_counts[n]) / total;
}

struct EvalOptions {
    unsigned workers = 1;
    bool filtered = true;
};

// Ranks both sides of every triple; aggregates over 2 * |test| ranks.
inline EvalResult evaluate(const ModelParams& params, std::span<const Triple> test, const KnownIndex& known,
                           EvalOptions options = {}) {
    if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
    for (const auto& t : test) check_ids(params, t);
    EvalResult result;
    result.per_triple.resize(test.size());

    auto work = [&](std::size_t begin, std::size_t end) {
        std::vector<double> scores, w_re, w_im;
        for (std::size_t i = begin; i < end; ++i) {
            const auto& t = test[i];
            detail::candidate_scores(params, t, Side::Head, scores, w_re, w_im);
            result.per_triple[i].head_rank =
                detail::rank_from_scores(scores, t.head, known.heads(t.rel, t.tail), options.filtered);
            detail::candidate_scores(params, t, Side::Tail, scores, w_re, w_im);
            result.per_triple[i].tail_rank =
                detail::rank_from_scores(scores, t.tail, known.tails(t.head, t.rel), options.filtered);
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, test.size());
    if (workers == 1) {
        work(0, test.size());
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (test.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            std::size_t begin = w * chunk;
            std::size_t end = std::min(test.size(), begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
    }
    aggregate(result);
    return result;
}

struct PairedTTest {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;

    bool significant(double alpha = 0.05) const { return p_value < alpha; }
};

// Two-sided paired t-test on a - b. Zero-variance differences give p = 1
// when their mean is 0 and p = 0 otherwise.
inline PairedTTest paired_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_ttest: samples differ in length");
    if (a.size() < 2) throw std::invalid_argument("paired_ttest: need at least two pairs");
    const double n = static_cast<double>(a.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double dev = (a[i] - b[i]) - mean;
        ss += dev * dev;
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    PairedTTest out;
    out.df = n - 1.0;
    if (sd == 0.0) {
        out.t = mean == 0.0 ? 0.0 : std::copysign(INFINITY, mean);
        out.p_value = mean == 0.0 ? 1.0 : 0.0;
        return out;
    }
    out.t = mean / (sd / std::sqrt(n));
    boost::math::students_t_distribution<double> dist(out.df);
    out.p_value = std::min(1.0, 2.0 * boost::math::cdf(dist, -std::abs(out.t)));
    return out;
}

// Per-direction observations (head then tail for each triple) for a metric.
enum class RankMetric { ReciprocalRank, Hits1, Hits3, Hits10 };

inline std::vector<double> rank_observations(std::span<const RankPair> ranks, RankMetric metric) {
    auto value = [metric](std::uint64_t rank) {
        switch (metric) {
            case RankMetric::ReciprocalRank:
                return 1.0 / static_cast<double>(rank);
            case RankMetric::Hits1:
                return rank <= 1 ? 1.0 : 0.0;
            case RankMetric::Hits3:
                return rank <= 3 ? 1.0 : 0.0;
            case RankMetric::Hits10:
                return rank <= 10 ? 1.0 : 0.0;
        }
        return 0.0;
    };
    std::vector<double> out;
    out.reserve(2 * ranks.size());
    for (const auto& rp : ranks) {
        out.push_back(value(rp.head_rank));
        out.push_back(value(rp.tail_rank));
    }
    return out;
}

}  // namespace kgec
