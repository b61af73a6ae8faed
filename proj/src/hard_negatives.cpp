#include "npmd/hard_negatives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "npmd/rng.hpp"

namespace npmd {

const char* to_string(SelectionStrategy s) {
    switch (s) {
        case SelectionStrategy::RD: return "rd";
        case SelectionStrategy::ClusterRD: return "cluster-rd";
        case SelectionStrategy::ClusterMin: return "cluster-min";
    }
    return "?";
}

SelectionStrategy strategy_from_string(const std::string& s) {
    if (s == "rd") return SelectionStrategy::RD;
    if (s == "cluster-rd") return SelectionStrategy::ClusterRD;
    if (s == "cluster-min") return SelectionStrategy::ClusterMin;
    throw ConfigError("unknown selection strategy '" + s + "' (rd, cluster-rd, cluster-min)");
}

AffinityMatrix build_affinity(const std::vector<Vec>& neg_embeddings) {
    const int m = static_cast<int>(neg_embeddings.size());
    if (m < 1) throw ConfigError("build_affinity: needs at least one embedding");
    const std::size_t dim = neg_embeddings.front().size();
    for (const auto& v : neg_embeddings)
        if (v.size() != dim) throw ConfigError("build_affinity: inconsistent embedding dims");

    AffinityMatrix s(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j) {
            const double v = dot(neg_embeddings[static_cast<std::size_t>(i)],
                                 neg_embeddings[static_cast<std::size_t>(j)]);
            s(i, j) = v;
            s(j, i) = v;
        }
    }
    return s;
}

Eigen::MatrixXd normalized_laplacian(const AffinityMatrix& affinity) {
    const Eigen::Index m = affinity.rows();
    Eigen::MatrixXd a = affinity.cwiseMax(0.0);
    a.diagonal().setZero();

    Eigen::VectorXd deg = a.rowwise().sum();
    for (Eigen::Index i = 0; i < m; ++i)
        if (deg(i) <= 0.0) deg(i) = 1.0;  // isolated row

    const Eigen::VectorXd dinv = deg.array().rsqrt();
    Eigen::MatrixXd l = Eigen::MatrixXd::Identity(m, m);
    l.noalias() -= dinv.asDiagonal() * a * dinv.asDiagonal();
    return l;
}

void sym_eig(const Eigen::MatrixXd& m, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) throw NumericError("sym_eig: eigensolver did not converge");
    values = solver.eigenvalues();
    vectors = solver.eigenvectors();
}

namespace {

// Seeded k-means with k-means++ initialization on the rows of x.
std::vector<int> kmeans_rows(const Eigen::MatrixXd& x, int k, Rng& rng) {
    const int m = static_cast<int>(x.rows());
    std::vector<int> center_idx;
    center_idx.reserve(static_cast<std::size_t>(k));

    std::uniform_int_distribution<int> first(0, m - 1);
    center_idx.push_back(first(rng));

    Eigen::VectorXd d2 = (x.rowwise() - x.row(center_idx[0])).rowwise().squaredNorm();
    while (static_cast<int>(center_idx.size()) < k) {
        const double total = d2.sum();
        int pick = -1;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng);
            for (int i = 0; i < m; ++i) {
                r -= d2(i);
                if (r <= 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) pick = m - 1;
        } else {
            // All points coincide with existing centers; take the first
            // index not already chosen.
            for (int i = 0; i < m && pick < 0; ++i)
                if (std::find(center_idx.begin(), center_idx.end(), i) == center_idx.end()) pick = i;
            if (pick < 0) pick = 0;
        }
        center_idx.push_back(pick);
        d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
    }

    Eigen::MatrixXd centers(k, x.cols());
    for (int c = 0; c < k; ++c) centers.row(c) = x.row(center_idx[static_cast<std::size_t>(c)]);

    std::vector<int> labels(static_cast<std::size_t>(m), 0);
    constexpr int kMaxIter = 100;
    constexpr double kTol = 1e-9;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        for (int i = 0; i < m; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int c = 0; c < k; ++c) {
                const double d = (x.row(i) - centers.row(c)).squaredNorm();
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            labels[static_cast<std::size_t>(i)] = arg;
        }

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int i = 0; i < m; ++i) {
            sums.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
            counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])]++;
        }
        // Empty cluster: reseat on the point farthest from its center.
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            double worst = -1.0;
            int arg = 0;
            for (int i = 0; i < m; ++i) {
                const double d = (x.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
                if (d > worst) {
                    worst = d;
                    arg = i;
                }
            }
            sums.row(labels[static_cast<std::size_t>(arg)]) -= x.row(arg);
            counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(arg)])]--;
            labels[static_cast<std::size_t>(arg)] = c;
            sums.row(c) += x.row(arg);
            counts[static_cast<std::size_t>(c)] = 1;
        }

        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) continue;
            const Eigen::RowVectorXd nc = sums.row(c) / counts[static_cast<std::size_t>(c)];
            shift = std::max(shift, (nc - centers.row(c)).squaredNorm());
            centers.row(c) = nc;
        }
        if (shift <= kTol) break;
    }
    return labels;
}

}  // namespace

std::vector<int> spectral_cluster(const AffinityMatrix& affinity, int k, std::uint64_t seed) {
    const int m = static_cast<int>(affinity.rows());
    if (affinity.rows() != affinity.cols()) throw ConfigError("spectral_cluster: matrix not square");
    if (k < 1 || k > m) throw ConfigError("spectral_cluster: k must be in [1, M]");

    std::vector<int> labels(static_cast<std::size_t>(m));
    if (k == m) {
        for (int i = 0; i < m; ++i) labels[static_cast<std::size_t>(i)] = i;
        return labels;
    }
    if (k == 1) return std::vector<int>(static_cast<std::size_t>(m), 0);

    const Eigen::MatrixXd l = normalized_laplacian(affinity);
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    sym_eig(l, values, vectors);

    Eigen::MatrixXd u = vectors.leftCols(k);
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        const double n = u.row(i).norm();
        if (n > kDegenerateNorm) u.row(i) /= n;
    }

    Rng rng = make_rng(seed);
    return kmeans_rows(u, k, rng);
}

std::vector<int> select_hard_negatives(const std::vector<Vec>& neg_embeddings, int k,
                                       SelectionStrategy strategy, std::uint64_t seed) {
    const int m = static_cast<int>(neg_embeddings.size());
    if (m == 0) return {};
    if (k < 1) throw ConfigError("select_hard_negatives: k must be >= 1");

    std::vector<int> out;
    if (m <= k) {
        out.resize(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] = i;
        return out;
    }

    if (strategy == SelectionStrategy::RD) {
        Rng rng = make_rng(mix_seed(seed, 0));
        return sample_without_replacement(m, k, rng);
    }

    // Clustering and the per-cluster picks use distinct derived streams.
    Rng rng = make_rng(mix_seed(seed, 2));
    const std::vector<int> labels =
        spectral_cluster(build_affinity(neg_embeddings), k, mix_seed(seed, 1));
    std::vector<std::vector<int>> members(static_cast<std::size_t>(k));
    for (int i = 0; i < m; ++i) members[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);

    for (int c = 0; c < k; ++c) {
        const auto& cluster = members[static_cast<std::size_t>(c)];
        if (cluster.empty()) continue;
        if (strategy == SelectionStrategy::ClusterRD) {
            std::uniform_int_distribution<int> pick(0, static_cast<int>(cluster.size()) - 1);
            out.push_back(cluster[static_cast<std::size_t>(pick(rng))]);
        } else {  // ClusterMin: the medoid
            int best = cluster.front();
            double best_mean = std::numeric_limits<double>::infinity();
            for (int i : cluster) {
                double sum = 0.0;
                for (int j : cluster) {
                    if (i == j) continue;
                    sum += euclidean(neg_embeddings[static_cast<std::size_t>(i)],
                                     neg_embeddings[static_cast<std::size_t>(j)]);
                }
                const double mean =
                    cluster.size() > 1 ? sum / static_cast<double>(cluster.size() - 1) : 0.0;
                if (mean < best_mean) {
                    best_mean = mean;
                    best = i;
                }
            }
            out.push_back(best);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace npmd
