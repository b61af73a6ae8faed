#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "npmd/embed_net.hpp"
#include "npmd/losses.hpp"
#include "npmd/representatives.hpp"
#include "npmd/synth_world.hpp"

namespace npmd {

struct TrainConfig {
    int epochs = 20;
    double base_lr = 0.01;
    std::vector<int> lr_decay_epochs = {4, 6, 15};
    double lr_decay_factor = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch_scenes = 4;
    int pos_cap = 16;  // per-scene proposal caps per label
    int neg_cap = 16;
    double pos_iou_thresh = 0.7;
    std::pair<double, double> neg_iou_band = {0.2, 0.3};
    int n_reps = 5;  // K representatives per class per side
    std::uint64_t seed = 7;

    void validate() const;
};

struct Model {
    NetParams net;
    RepBank bank;
};

struct TrainState {
    Model model;
    NetParams net_momentum;
    RepBank bank_momentum;
    int epoch = 0;        // completed epochs
    long long step = 0;   // global optimizer steps
};

struct StepLog {
    long long step = 0;
    int epoch = 0;
    double lr = 0.0;
    double ce = 0.0;
    double triplet = 0.0;
    double total = 0.0;
};

// Learning rate for a 1-based epoch: base_lr times lr_decay_factor for
// every decay epoch <= epoch.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

struct BatchItem {
    int scene_index = 0;     // into the scenes span
    int proposal_index = 0;  // into that scene's proposals
    ProposalLabel label;
};

// Labels every proposal by IoU band against the scene's ground truths, then
// subsamples (seeded, uniform) to at most pos_cap positives and neg_cap
// negatives per scene. Ignored proposals are dropped. Item order follows
// (scene, proposal index) ascending.
std::vector<BatchItem> assemble_batch(std::span<const SyntheticScene> scenes,
                                      const TrainConfig& cfg, std::uint64_t seed);

// Momentum SGD with weight decay on weights and representatives (not
// biases): v <- momentum*v + g + wd*p; p <- p - lr*v. Representative rows
// are renormalized to unit length afterwards. Throws NumericError on
// non-finite gradients.
void sgd_step(TrainState& state, const NetParams& net_grads, const RepBank& bank_grads, double lr,
              const TrainConfig& cfg);

using EpochCallback = std::function<void(const TrainState&, int epoch)>;

// Full training loop over the dataset's base-class scenes. A dataset
// touching a novel class id is rejected (leakage guard). Deterministic for
// fixed seeds regardless of thread count.
TrainState train(const Dataset& dataset, const TrainConfig& cfg, const EmbedConfig& embed_cfg,
                 const LossConfig& loss_cfg, const ProbConfig& prob_cfg,
                 std::vector<StepLog>* logs = nullptr, const EpochCallback& on_epoch = nullptr,
                 const TrainState* resume_from = nullptr);

}  // namespace npmd
