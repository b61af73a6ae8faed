#include "npmd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <string>

#include "npmd/parallel.hpp"
#include "npmd/rng.hpp"

namespace npmd {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
    if (!(base_lr > 0.0)) throw ConfigError("TrainConfig: base_lr must be > 0");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0))
        throw ConfigError("TrainConfig: lr_decay_factor must be in (0,1]");
    for (std::size_t i = 0; i < lr_decay_epochs.size(); ++i) {
        if (lr_decay_epochs[i] < 1 || lr_decay_epochs[i] > epochs)
            throw ConfigError("TrainConfig: decay epochs must lie in [1, epochs]");
        if (i > 0 && lr_decay_epochs[i] <= lr_decay_epochs[i - 1])
            throw ConfigError("TrainConfig: decay epochs must be strictly increasing");
    }
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("TrainConfig: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("TrainConfig: weight_decay must be >= 0");
    if (batch_scenes < 1) throw ConfigError("TrainConfig: batch_scenes must be >= 1");
    if (pos_cap < 1 || neg_cap < 0) throw ConfigError("TrainConfig: caps invalid");
    if (!(pos_iou_thresh > neg_iou_band.second))
        throw ConfigError("TrainConfig: pos_iou_thresh must exceed the negative band");
    if (!(neg_iou_band.first >= 0.0 && neg_iou_band.first < neg_iou_band.second))
        throw ConfigError("TrainConfig: negative band invalid");
    if (n_reps < 1) throw ConfigError("TrainConfig: n_reps must be >= 1");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    int decays = 0;
    for (int d : cfg.lr_decay_epochs)
        if (d <= epoch) ++decays;
    return cfg.base_lr * std::pow(cfg.lr_decay_factor, decays);
}

std::vector<BatchItem> assemble_batch(std::span<const SyntheticScene> scenes,
                                      const TrainConfig& cfg, std::uint64_t seed) {
    std::vector<BatchItem> out;
    Rng rng = make_rng(seed);
    for (std::size_t si = 0; si < scenes.size(); ++si) {
        const SyntheticScene& scene = scenes[si];
        std::vector<std::pair<Box, int>> gts;
        gts.reserve(scene.gts.size());
        for (const auto& gt : scene.gts) gts.emplace_back(gt.box, gt.class_id);

        std::vector<int> pos_idx, neg_idx;
        std::vector<ProposalLabel> labels(scene.proposals.size());
        for (std::size_t pi = 0; pi < scene.proposals.size(); ++pi) {
            labels[pi] = label_proposal(scene.proposals[pi].box, gts, cfg.pos_iou_thresh,
                                        cfg.neg_iou_band);
            if (labels[pi].kind == ProposalLabel::Kind::Positive)
                pos_idx.push_back(static_cast<int>(pi));
            else if (labels[pi].kind == ProposalLabel::Kind::Negative)
                neg_idx.push_back(static_cast<int>(pi));
        }

        auto subsample = [&](std::vector<int>& idx, int cap) {
            if (static_cast<int>(idx.size()) <= cap) return;
            const std::vector<int> keep =
                sample_without_replacement(static_cast<int>(idx.size()), cap, rng);
            std::vector<int> kept;
            kept.reserve(keep.size());
            for (int k : keep) kept.push_back(idx[static_cast<std::size_t>(k)]);
            idx = std::move(kept);
        };
        subsample(pos_idx, cfg.pos_cap);
        subsample(neg_idx, cfg.neg_cap);

        std::vector<int> selected;
        selected.insert(selected.end(), pos_idx.begin(), pos_idx.end());
        selected.insert(selected.end(), neg_idx.begin(), neg_idx.end());
        std::sort(selected.begin(), selected.end());
        for (int pi : selected)
            out.push_back({static_cast<int>(si), pi, labels[static_cast<std::size_t>(pi)]});
    }
    return out;
}

namespace {

void check_finite(const NetParams& g, const RepBank& bg) {
    double probe = 0.0;
    for (const auto& l : g.layers) {
        for (double v : l.w) probe += v;
        for (double v : l.b) probe += v;
    }
    for (const auto& c : bg.classes) {
        for (double v : c.pos) probe += v;
        for (double v : c.neg) probe += v;
    }
    if (!std::isfinite(probe))
        throw NumericError("sgd_step: non-finite gradient encountered");
}

void momentum_update(Vec& param, Vec& velocity, const Vec& grad, double lr, double momentum,
                     double weight_decay) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * param[i];
        param[i] -= lr * velocity[i];
    }
}

}  // namespace

void sgd_step(TrainState& state, const NetParams& net_grads, const RepBank& bank_grads, double lr,
              const TrainConfig& cfg) {
    check_finite(net_grads, bank_grads);
    for (std::size_t l = 0; l < state.model.net.layers.size(); ++l) {
        momentum_update(state.model.net.layers[l].w, state.net_momentum.layers[l].w,
                        net_grads.layers[l].w, lr, cfg.momentum, cfg.weight_decay);
        momentum_update(state.model.net.layers[l].b, state.net_momentum.layers[l].b,
                        net_grads.layers[l].b, lr, cfg.momentum, 0.0);  // no decay on biases
    }
    for (std::size_t c = 0; c < state.model.bank.classes.size(); ++c) {
        momentum_update(state.model.bank.classes[c].pos, state.bank_momentum.classes[c].pos,
                        bank_grads.classes[c].pos, lr, cfg.momentum, cfg.weight_decay);
        momentum_update(state.model.bank.classes[c].neg, state.bank_momentum.classes[c].neg,
                        bank_grads.classes[c].neg, lr, cfg.momentum, cfg.weight_decay);
    }
    state.model.bank.renormalize_rows();  // projection back onto the unit sphere
    ++state.step;
}

TrainState train(const Dataset& dataset, const TrainConfig& cfg, const EmbedConfig& embed_cfg,
                 const LossConfig& loss_cfg, const ProbConfig& prob_cfg,
                 std::vector<StepLog>* logs, const EpochCallback& on_epoch,
                 const TrainState* resume_from) {
    cfg.validate();
    embed_cfg.validate();
    loss_cfg.validate();
    const WorldConfig& wcfg = dataset.world.config;
    if (embed_cfg.input_dim != wcfg.feature_dim)
        throw ConfigError("train: embed input_dim != dataset feature_dim");
    if (dataset.scenes.empty()) throw ConfigError("train: dataset has no scenes");
    for (const auto& scene : dataset.scenes)
        for (const auto& gt : scene.gts)
            if (wcfg.is_novel(gt.class_id))
                throw ConfigError("train: dataset contains novel class id " +
                                  std::to_string(gt.class_id) + " (leakage)");

    TrainState state;
    if (resume_from) {
        state = *resume_from;
    } else {
        state.model.net = init_params(embed_cfg, mix_seed(cfg.seed, 1));
        state.model.bank =
            init_rep_bank(wcfg.n_base_classes, cfg.n_reps, embed_cfg.embed_dim, mix_seed(cfg.seed, 2));
        state.net_momentum = zeros_like(state.model.net);
        state.bank_momentum = zeros_like(state.model.bank);
    }

    NetParams net_grads = zeros_like(state.model.net);

    const int start_epoch = state.epoch + 1;
    for (int epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        std::vector<std::size_t> order(dataset.scenes.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng = make_rng(mix_seed(cfg.seed, 0xE70C00ULL + static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.batch_scenes)) {
            const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_scenes));
            std::vector<SyntheticScene> chunk;  // local copies keep item order stable
            chunk.reserve(end - pos);
            for (std::size_t i = pos; i < end; ++i) chunk.push_back(dataset.scenes[order[i]]);

            // Leakage guard, per batch.
            for (const auto& scene : chunk)
                for (const auto& gt : scene.gts)
                    if (wcfg.is_novel(gt.class_id))
                        throw ConfigError("train: novel class in batch (leakage)");

            const std::uint64_t batch_seed =
                mix_seed(cfg.seed, 0xBA7C40ULL + static_cast<std::uint64_t>(state.step + 1));
            const std::vector<BatchItem> items = assemble_batch(chunk, cfg, batch_seed);
            if (items.empty()) {
                std::cerr << "[npmd] warning: batch at step " << (state.step + 1)
                          << " has no labeled proposals; skipped\n";
                ++state.step;
                continue;
            }

            std::vector<Vec> features;
            features.reserve(items.size());
            for (const auto& it : items)
                features.push_back(chunk[static_cast<std::size_t>(it.scene_index)]
                                       .proposals[static_cast<std::size_t>(it.proposal_index)]
                                       .feature);

            std::vector<ForwardCache> caches;
            const std::vector<NPEmbedding> embs = forward_batch(state.model.net, features, &caches);

            std::vector<LabeledEmbedding> batch(items.size());
            for (std::size_t i = 0; i < items.size(); ++i) batch[i] = {embs[i], items[i].label};

            const BatchLossResult loss = batch_loss(batch, state.model.bank, loss_cfg, prob_cfg);

            // Backward through the net; serial accumulation in item order
            // keeps checkpoints bitwise reproducible.
            for (auto& l : net_grads.layers) {
                std::fill(l.w.begin(), l.w.end(), 0.0);
                std::fill(l.b.begin(), l.b.end(), 0.0);
            }
            for (std::size_t i = 0; i < items.size(); ++i)
                backward(state.model.net, caches[i], loss.emb_grads[i].d_e_pos,
                         loss.emb_grads[i].d_e_neg, net_grads);

            sgd_step(state, net_grads, loss.bank_grads, lr, cfg);
            if (logs)
                logs->push_back({state.step, epoch, lr, loss.breakdown.cross_entropy,
                                 loss.breakdown.triplet, loss.breakdown.total});
        }
        state.epoch = epoch;
        if (on_epoch) on_epoch(state, epoch);
    }
    return state;
}

}  // namespace npmd
