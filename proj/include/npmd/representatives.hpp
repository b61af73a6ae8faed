#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "npmd/embed_net.hpp"
#include "npmd/error.hpp"
#include "npmd/vecmath.hpp"

namespace npmd {

// Per-class banks of unit-norm representatives. During training every class
// holds exactly n_reps rows per side; replace_class_reps makes the per-class
// counts ragged (inference installs support embeddings of varying number).
struct RepBank {
    struct ClassReps {
        Vec pos;  // pos_count x embed_dim, row-major
        Vec neg;  // neg_count x embed_dim, row-major
        int pos_count = 0;
        int neg_count = 0;
    };

    int n_classes = 0;
    int n_reps = 0;
    int embed_dim = 0;
    std::vector<ClassReps> classes;

    std::span<const double> pos_row(int cls, int j) const {
        return {classes[static_cast<std::size_t>(cls)].pos.data() +
                    static_cast<std::size_t>(j) * static_cast<std::size_t>(embed_dim),
                static_cast<std::size_t>(embed_dim)};
    }
    std::span<const double> neg_row(int cls, int j) const {
        return {classes[static_cast<std::size_t>(cls)].neg.data() +
                    static_cast<std::size_t>(j) * static_cast<std::size_t>(embed_dim),
                static_cast<std::size_t>(embed_dim)};
    }
    std::span<double> pos_row(int cls, int j) {
        return {classes[static_cast<std::size_t>(cls)].pos.data() +
                    static_cast<std::size_t>(j) * static_cast<std::size_t>(embed_dim),
                static_cast<std::size_t>(embed_dim)};
    }
    std::span<double> neg_row(int cls, int j) {
        return {classes[static_cast<std::size_t>(cls)].neg.data() +
                    static_cast<std::size_t>(j) * static_cast<std::size_t>(embed_dim),
                static_cast<std::size_t>(embed_dim)};
    }

    // Renormalizes every representative row to unit length (projection step
    // after an SGD update).
    void renormalize_rows();
};

// Distance used when a class has no negative representatives; collapses the
// class probability to positive-only scoring.
inline constexpr double kMissingNegDistance = 2.0;

struct ClassDistances {
    std::vector<double> d_pos;  // min_j d(e_pos, R^p_ij), per class
    std::vector<double> d_neg;  // min_j d(e_neg, R^n_ij); kMissingNegDistance if none
    std::vector<int> arg_pos;   // argmin index, ties -> lowest
    std::vector<int> arg_neg;   // -1 when the class has no negative reps
};

struct ProbConfig {
    double beta = 0.3;
    double sigma = 0.5;
    double background_score = 0.25;

    void validate() const;
};

// Random unit rows for both sides of every class.
RepBank init_rep_bank(int n_classes, int n_reps, int embed_dim, std::uint64_t seed);

// Same shapes, all rows zero (gradient/momentum holder).
RepBank zeros_like(const RepBank& bank);

ClassDistances min_distances(const RepBank& bank, const NPEmbedding& emb);

// p_i = exp(-(d_pos_i - beta * d_neg_i + 2 beta) / (2 sigma^2)). The 2*beta
// offset keeps the exponent numerator nonnegative for distances in [0,2],
// so every p_i lies in (0, 1].
std::vector<double> class_probability(const ClassDistances& dists, const ProbConfig& cfg);

// Normalized posterior over the N classes plus background (last entry):
// q_i = p_i / (sum p + background_score), q_bg = background_score / (same).
std::vector<double> class_posterior(const std::vector<double>& p, const ProbConfig& cfg);

// Installs support embeddings as the class's representatives. pos_vectors
// must be non-empty; an empty neg_vectors is allowed and triggers the
// missing-negative fallback in min_distances.
void replace_class_reps(RepBank& bank, int class_id, const std::vector<Vec>& pos_vectors,
                        const std::vector<Vec>& neg_vectors);

}  // namespace npmd
