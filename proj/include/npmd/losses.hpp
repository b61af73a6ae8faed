#pragma once

#include <span>
#include <vector>

#include "npmd/embed_net.hpp"
#include "npmd/geometry.hpp"
#include "npmd/representatives.hpp"

namespace npmd {

struct LossConfig {
    double alpha = 0.5;
    double ce_weight = 1.0;
    double triplet_weight = 1.0;

    void validate() const;
};

struct LossBreakdown {
    double triplet = 0.0;
    double cross_entropy = 0.0;
    double total = 0.0;
};

// One gradient entry into a representative row.
struct RepGrad {
    int cls = 0;
    bool pos_side = true;
    int j = 0;
    Vec g;
};

// Loss + gradients touching the query embedding and the three active
// (argmin) representatives. Gradient is zero inside the hinge's flat region.
struct TripletResult {
    double loss = 0.0;
    Vec d_query;
    std::vector<RepGrad> rep_grads;
};

// Hinge margin between the matched-side distance and the mean of the two
// mismatched distances:
//   | min_j d(E^p, R^p_{c j}) - (min_j d(E^p, R^n_{c j})
//     + min_{i != c, j} d(E^p, R^p_{i j})) / 2 + alpha |_+
// Requires at least one other class with positive representatives.
TripletResult triplet_pos(const NPEmbedding& emb, const RepBank& bank, int true_class,
                          double alpha);

// Same structure with the positive/negative roles swapped (query is e_neg,
// matched side is the negative bank).
TripletResult triplet_neg(const NPEmbedding& emb, const RepBank& bank, int true_class,
                          double alpha);

struct CrossEntropyResult {
    double loss = 0.0;
    std::vector<double> d_posterior_inputs;  // d loss / d p_k (pre-normalization scores)
};

// -log(posterior[target]); target == posterior.size()-1 is background.
CrossEntropyResult cross_entropy(const std::vector<double>& posterior, int target);

struct LabeledEmbedding {
    NPEmbedding emb;
    ProposalLabel label;
};

struct EmbGrad {
    Vec d_e_pos;
    Vec d_e_neg;
};

struct BatchLossResult {
    LossBreakdown breakdown;
    std::vector<EmbGrad> emb_grads;  // per input item; zero rows for Ignored
    RepBank bank_grads;              // same shapes as the bank
    int contributing = 0;
};

// Mean loss over contributing (non-Ignored) proposals. Positive proposals
// contribute triplet_pos + cross-entropy against their class; Negative
// proposals contribute triplet_neg + cross-entropy against background.
// Gradients are for breakdown.total. OpenMP over items with an index-order
// reduction, so results are identical for any thread count.
BatchLossResult batch_loss(std::span<const LabeledEmbedding> batch, const RepBank& bank,
                           const LossConfig& loss_cfg, const ProbConfig& prob_cfg);

// Straight-loop reference implementation; bitwise-identical to batch_loss.
BatchLossResult batch_loss_serial(std::span<const LabeledEmbedding> batch, const RepBank& bank,
                                  const LossConfig& loss_cfg, const ProbConfig& prob_cfg);

}  // namespace npmd
