#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "npmd/error.hpp"
#include "npmd/vecmath.hpp"

namespace npmd {

// M x M matrix of pairwise dot products between unit embedding vectors;
// symmetric with unit diagonal.
using AffinityMatrix = Eigen::MatrixXd;

enum class SelectionStrategy { RD, ClusterRD, ClusterMin };

const char* to_string(SelectionStrategy s);
SelectionStrategy strategy_from_string(const std::string& s);

AffinityMatrix build_affinity(const std::vector<Vec>& neg_embeddings);

// Symmetric normalized Laplacian L = I - D^{-1/2} A D^{-1/2} where A is the
// affinity with negative entries clamped to zero and a zeroed diagonal;
// zero-degree rows get a unit substitute degree.
Eigen::MatrixXd normalized_laplacian(const AffinityMatrix& affinity);

// Full symmetric eigendecomposition, eigenvalues ascending.
void sym_eig(const Eigen::MatrixXd& m, Eigen::VectorXd& values, Eigen::MatrixXd& vectors);

// Ng-Jordan-Weiss spectral clustering on an affinity matrix: k smallest
// eigenvectors of the normalized Laplacian, row-normalized, then seeded
// k-means (k-means++ init, <= 100 iterations, tol 1e-9). Labels in [0, k).
std::vector<int> spectral_cluster(const AffinityMatrix& affinity, int k, std::uint64_t seed);

// Picks up to k hard negatives from the candidate embeddings; returns
// ascending candidate indices. M <= k returns everything. RD samples
// uniformly; ClusterRD clusters and samples one member per cluster;
// ClusterMin clusters and takes each cluster's medoid (member with minimal
// mean Euclidean distance to the rest; ties -> lowest index).
std::vector<int> select_hard_negatives(const std::vector<Vec>& neg_embeddings, int k,
                                       SelectionStrategy strategy, std::uint64_t seed);

}  // namespace npmd
