#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "npmd/error.hpp"
#include "npmd/vecmath.hpp"

namespace npmd {

struct EmbedConfig {
    int input_dim = 64;
    std::vector<int> trunk_dims = {128, 128};
    int embed_dim = 32;
    // Merges the two head branches into one shared head, so e_neg == e_pos
    // exactly (the single-embedding ablation).
    bool single_embedding = false;

    void validate() const;
    bool operator==(const EmbedConfig&) const = default;
};

// The two unit-norm embedding vectors produced per proposal.
struct NPEmbedding {
    Vec e_neg;
    Vec e_pos;
};

struct DenseLayer {
    int in = 0, out = 0;
    Vec w;  // out x in, row-major
    Vec b;  // out
};

// Trunk of relu layers plus one affine head per embedding (or a single
// shared head in single_embedding mode). Layer order: trunk..., pos head,
// neg head.
struct NetParams {
    EmbedConfig config;
    std::vector<DenseLayer> layers;

    int n_heads() const { return config.single_embedding ? 1 : 2; }
    int trunk_count() const { return static_cast<int>(config.trunk_dims.size()); }
    const DenseLayer& pos_head() const { return layers[static_cast<std::size_t>(trunk_count())]; }
    const DenseLayer& neg_head() const {
        return layers[static_cast<std::size_t>(trunk_count() + n_heads() - 1)];
    }
};

// Activations saved by forward for the matching backward call.
struct ForwardCache {
    Vec input;
    std::vector<Vec> trunk_pre;   // pre-activation per trunk layer
    std::vector<Vec> trunk_act;   // relu output per trunk layer
    Vec head_pre_pos, head_pre_neg;
    double norm_pos = 0.0, norm_neg = 0.0;  // 0.0 marks the degenerate branch
    NPEmbedding out;
};

NetParams init_params(const EmbedConfig& config, std::uint64_t seed);

// Shapes-matched zero gradient holder.
NetParams zeros_like(const NetParams& params);

NPEmbedding forward(const NetParams& params, std::span<const double> raw_feature,
                    ForwardCache* cache = nullptr);

// Exact analytic gradients for the upstream (d e_pos, d e_neg) pair.
// Accumulates parameter gradients into grads (shapes must match params);
// optionally accumulates the input gradient. The L2-normalization Jacobian
// is (I - e e^T)/||v||; the degenerate branch propagates zero.
void backward(const NetParams& params, const ForwardCache& cache, std::span<const double> d_e_pos,
              std::span<const double> d_e_neg, NetParams& grads, Vec* d_input = nullptr);

// Batch forward over many feature vectors; OpenMP over items.
std::vector<NPEmbedding> forward_batch(const NetParams& params, const std::vector<Vec>& features,
                                       std::vector<ForwardCache>* caches = nullptr);

// Plain-loop reference for forward_batch; bitwise-identical results.
std::vector<NPEmbedding> forward_batch_serial(const NetParams& params,
                                              const std::vector<Vec>& features,
                                              std::vector<ForwardCache>* caches = nullptr);

}  // namespace npmd
