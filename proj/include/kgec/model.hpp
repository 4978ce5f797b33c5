#pragma once

// Complex-valued entity/relation embeddings stored as four real matrices.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "kgec/data.hpp"

namespace kgec {

// Row-major n x d block of reals.
class Matrix {
   public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, value) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool operator==(const Matrix&) const = default;

   private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct ModelParams {
    Matrix entity_re;
    Matrix entity_im;
    Matrix relation_re;
    Matrix relation_im;

    ModelParams() = default;
    ModelParams(std::size_t n, std::size_t m, std::size_t d)
        : entity_re(n, d), entity_im(n, d), relation_re(m, d), relation_im(m, d) {}

    std::size_t num_entities() const { return entity_re.rows(); }
    std::size_t num_relations() const { return relation_re.rows(); }
    std::size_t dim() const { return entity_re.cols(); }

    bool operator==(const ModelParams&) const = default;
};

class IndexError : public std::out_of_range {
    using std::out_of_range::out_of_range;
};

inline void check_ids(const ModelParams& params, const Triple& t) {
    if (t.head >= params.num_entities() || t.tail >= params.num_entities())
        throw IndexError("entity id out of range");
    if (t.rel >= params.num_relations()) throw IndexError("relation id out of range");
}

// Re(<e_i, r, conj(e_j)>) written out over the real components.
inline double score(std::span<const double> head_re, std::span<const double> head_im,
                    std::span<const double> rel_re, std::span<const double> rel_im,
                    std::span<const double> tail_re, std::span<const double> tail_im) {
    double sum = 0.0;
    for (std::size_t l = 0; l < head_re.size(); ++l) {
        sum += head_re[l] * rel_re[l] * tail_re[l] + head_im[l] * rel_re[l] * tail_im[l] +
               head_re[l] * rel_im[l] * tail_im[l] - head_im[l] * rel_im[l] * tail_re[l];
    }
    return sum;
}

inline double score_triple(const ModelParams& params, const Triple& t) {
    check_ids(params, t);
    return score(params.entity_re.row(t.head), params.entity_im.row(t.head), params.relation_re.row(t.rel),
                 params.relation_im.row(t.rel), params.entity_re.row(t.tail), params.entity_im.row(t.tail));
}

struct RelationRep {
    std::vector<double> re;
    std::vector<double> im;
};

// conj(r): the representation of r^-1, since phi(i, r, j) == phi(j, conj(r), i).
inline RelationRep inverse_relation_rep(const ModelParams& params, RelationId rel) {
    if (rel >= params.num_relations()) throw IndexError("relation id out of range");
    auto re = params.relation_re.row(rel);
    auto im = params.relation_im.row(rel);
    RelationRep out{{re.begin(), re.end()}, std::vector<double>(im.size())};
    std::transform(im.begin(), im.end(), out.im.begin(), [](double x) { return -x; });
    return out;
}

inline void clamp_unit(std::span<double> xs) {
    for (auto& x : xs) x = std::clamp(x, 0.0, 1.0);
}

// Truncates every entity component into [0, 1].
inline void project_entities(ModelParams& params) {
    clamp_unit(params.entity_re.data());
    clamp_unit(params.entity_im.data());
}

inline void project_entity_rows(ModelParams& params, std::span<const EntityId> rows) {
    for (auto e : rows) {
        clamp_unit(params.entity_re.row(e));
        clamp_unit(params.entity_im.row(e));
    }
}

// Entities ~ U[0, 1]; relations ~ N(0, 1/d).
inline ModelParams init_params(std::size_t n, std::size_t m, std::size_t d, std::uint64_t seed) {
    if (n == 0 || m == 0 || d == 0) throw std::invalid_argument("init_params: n, m and d must be positive");
    ModelParams params(n, m, d);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
    for (auto& x : params.entity_re.data()) x = unit(rng);
    for (auto& x : params.entity_im.data()) x = unit(rng);
    for (auto& x : params.relation_re.data()) x = normal(rng);
    for (auto& x : params.relation_im.data()) x = normal(rng);
    return params;
}

}  // namespace kgec
