#include "npmd/representatives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "npmd/rng.hpp"

namespace npmd {

void ProbConfig::validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("ProbConfig: beta must be in (0,1)");
    if (!(sigma > 0.0)) throw ConfigError("ProbConfig: sigma must be > 0");
    if (!(background_score > 0.0)) throw ConfigError("ProbConfig: background_score must be > 0");
}

void RepBank::renormalize_rows() {
    for (int c = 0; c < n_classes; ++c) {
        auto& cr = classes[static_cast<std::size_t>(c)];
        for (int j = 0; j < cr.pos_count; ++j) {
            auto row = pos_row(c, j);
            Vec v(row.begin(), row.end());
            normalize_unit(v);
            std::copy(v.begin(), v.end(), row.begin());
        }
        for (int j = 0; j < cr.neg_count; ++j) {
            auto row = neg_row(c, j);
            Vec v(row.begin(), row.end());
            normalize_unit(v);
            std::copy(v.begin(), v.end(), row.begin());
        }
    }
}

RepBank init_rep_bank(int n_classes, int n_reps, int embed_dim, std::uint64_t seed) {
    if (n_classes < 1 || n_reps < 1 || embed_dim < 1)
        throw ConfigError("init_rep_bank: n_classes, n_reps and embed_dim must be >= 1");
    RepBank bank;
    bank.n_classes = n_classes;
    bank.n_reps = n_reps;
    bank.embed_dim = embed_dim;
    bank.classes.resize(static_cast<std::size_t>(n_classes));
    Rng rng = make_rng(seed);
    for (auto& cr : bank.classes) {
        cr.pos_count = n_reps;
        cr.neg_count = n_reps;
        cr.pos.reserve(static_cast<std::size_t>(n_reps * embed_dim));
        cr.neg.reserve(static_cast<std::size_t>(n_reps * embed_dim));
        for (int j = 0; j < n_reps; ++j) {
            const Vec v = random_unit_vector(embed_dim, rng);
            cr.pos.insert(cr.pos.end(), v.begin(), v.end());
        }
        for (int j = 0; j < n_reps; ++j) {
            const Vec v = random_unit_vector(embed_dim, rng);
            cr.neg.insert(cr.neg.end(), v.begin(), v.end());
        }
    }
    return bank;
}

RepBank zeros_like(const RepBank& bank) {
    RepBank z = bank;
    for (auto& cr : z.classes) {
        std::fill(cr.pos.begin(), cr.pos.end(), 0.0);
        std::fill(cr.neg.begin(), cr.neg.end(), 0.0);
    }
    return z;
}

ClassDistances min_distances(const RepBank& bank, const NPEmbedding& emb) {
    if (static_cast<int>(emb.e_pos.size()) != bank.embed_dim ||
        static_cast<int>(emb.e_neg.size()) != bank.embed_dim)
        throw ConfigError("min_distances: embedding dim " + std::to_string(emb.e_pos.size()) +
                          " != bank embed_dim " + std::to_string(bank.embed_dim));

    ClassDistances out;
    out.d_pos.resize(static_cast<std::size_t>(bank.n_classes));
    out.d_neg.resize(static_cast<std::size_t>(bank.n_classes));
    out.arg_pos.resize(static_cast<std::size_t>(bank.n_classes));
    out.arg_neg.resize(static_cast<std::size_t>(bank.n_classes));

    for (int c = 0; c < bank.n_classes; ++c) {
        const auto& cr = bank.classes[static_cast<std::size_t>(c)];
        if (cr.pos_count < 1)
            throw ConfigError("min_distances: class " + std::to_string(c) +
                              " has no positive representatives");
        double best = 0.0;
        int arg = -1;
        for (int j = 0; j < cr.pos_count; ++j) {
            const double d = euclidean(emb.e_pos, bank.pos_row(c, j));
            if (arg < 0 || d < best) {
                best = d;
                arg = j;
            }
        }
        out.d_pos[static_cast<std::size_t>(c)] = best;
        out.arg_pos[static_cast<std::size_t>(c)] = arg;

        if (cr.neg_count == 0) {
            out.d_neg[static_cast<std::size_t>(c)] = kMissingNegDistance;
            out.arg_neg[static_cast<std::size_t>(c)] = -1;
        } else {
            best = 0.0;
            arg = -1;
            for (int j = 0; j < cr.neg_count; ++j) {
                const double d = euclidean(emb.e_neg, bank.neg_row(c, j));
                if (arg < 0 || d < best) {
                    best = d;
                    arg = j;
                }
            }
            out.d_neg[static_cast<std::size_t>(c)] = best;
            out.arg_neg[static_cast<std::size_t>(c)] = arg;
        }
    }
    return out;
}

std::vector<double> class_probability(const ClassDistances& dists, const ProbConfig& cfg) {
    const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    std::vector<double> p(dists.d_pos.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double numerator = dists.d_pos[i] - cfg.beta * dists.d_neg[i] + 2.0 * cfg.beta;
        p[i] = std::exp(-numerator * inv);
    }
    return p;
}

std::vector<double> class_posterior(const std::vector<double>& p, const ProbConfig& cfg) {
    double denom = cfg.background_score;
    for (double v : p) denom += v;
    std::vector<double> q(p.size() + 1);
    for (std::size_t i = 0; i < p.size(); ++i) q[i] = p[i] / denom;
    q.back() = cfg.background_score / denom;
    return q;
}

void replace_class_reps(RepBank& bank, int class_id, const std::vector<Vec>& pos_vectors,
                        const std::vector<Vec>& neg_vectors) {
    if (class_id < 0 || class_id >= bank.n_classes)
        throw ConfigError("replace_class_reps: class_id out of range");
    if (pos_vectors.empty())
        throw ConfigError("replace_class_reps: a class needs at least one positive vector");

    auto check = [&](const Vec& v) {
        if (static_cast<int>(v.size()) != bank.embed_dim)
            throw ConfigError("replace_class_reps: vector dim mismatch");
        if (std::abs(norm2(v) - 1.0) > 1e-6)
            throw ConfigError("replace_class_reps: vectors must be unit norm");
    };

    auto& cr = bank.classes[static_cast<std::size_t>(class_id)];
    cr.pos.clear();
    cr.neg.clear();
    for (const auto& v : pos_vectors) {
        check(v);
        cr.pos.insert(cr.pos.end(), v.begin(), v.end());
    }
    for (const auto& v : neg_vectors) {
        check(v);
        cr.neg.insert(cr.neg.end(), v.begin(), v.end());
    }
    cr.pos_count = static_cast<int>(pos_vectors.size());
    cr.neg_count = static_cast<int>(neg_vectors.size());
}

}  // namespace npmd
