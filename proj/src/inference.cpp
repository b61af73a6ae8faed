#include "npmd/inference.hpp"

#include <algorithm>
#include <string>

#include "npmd/rng.hpp"

namespace npmd {

void InferenceConfig::validate() const {
    if (!(score_thresh >= 0.0 && score_thresh <= 1.0))
        throw ConfigError("InferenceConfig: score_thresh must be in [0,1]");
    if (!(softnms_iou > 0.0 && softnms_iou <= 1.0))
        throw ConfigError("InferenceConfig: softnms_iou must be in (0,1]");
    if (softnms_floor < 0.0) throw ConfigError("InferenceConfig: softnms_floor must be >= 0");
    if (!(nms_iou > 0.0 && nms_iou < 1.0))
        throw ConfigError("InferenceConfig: nms_iou must be in (0,1)");
    if (!(pos_iou_thresh > neg_iou_band.second))
        throw ConfigError("InferenceConfig: pos_iou_thresh must exceed the negative band");
    auto check_band = [](std::pair<double, double> b) {
        if (!(b.first >= 0.0 && b.first < b.second && b.second <= 1.0))
            throw ConfigError("InferenceConfig: IoU band invalid");
    };
    check_band(neg_iou_band);
    for (auto b : fallback_bands) check_band(b);
    if (k_negatives < 1) throw ConfigError("InferenceConfig: k_negatives must be >= 1");
}

namespace {

double same_class_iou(const Proposal& prop, const SyntheticScene& scene, int world_class) {
    double best = 0.0;
    for (const auto& gt : scene.gts)
        if (gt.class_id == world_class) best = std::max(best, iou(prop.box, gt.box));
    return best;
}

}  // namespace

SupportReps build_support_reps(const Model& model, const Episode& episode,
                               const InferenceConfig& cfg, std::uint64_t seed) {
    SupportReps reps;
    reps.class_ids = episode.class_ids;
    reps.classes.resize(static_cast<std::size_t>(episode.way));

    for (int c = 0; c < episode.way; ++c) {
        auto& out = reps.classes[static_cast<std::size_t>(c)];
        const int world_class = episode.class_ids[static_cast<std::size_t>(c)];
        const auto& scenes = episode.support[static_cast<std::size_t>(c)];

        // One forward pass per support scene; embeddings reused by the
        // positive filter and every band of the negative ladder.
        std::vector<std::vector<NPEmbedding>> embs(scenes.size());
        for (std::size_t s = 0; s < scenes.size(); ++s) {
            std::vector<Vec> feats;
            feats.reserve(scenes[s].proposals.size());
            for (const auto& p : scenes[s].proposals) feats.push_back(p.feature);
            embs[s] = forward_batch(model.net, feats);
        }

        for (std::size_t s = 0; s < scenes.size(); ++s) {
            for (std::size_t pi = 0; pi < scenes[s].proposals.size(); ++pi) {
                if (same_class_iou(scenes[s].proposals[pi], scenes[s], world_class) >
                    cfg.pos_iou_thresh) {
                    out.pos_vectors.push_back(embs[s][pi].e_pos);
                    out.pos_scene_ids.push_back(scenes[s].id);
                    out.pos_proposal_idx.push_back(static_cast<int>(pi));
                }
            }
        }
        if (out.pos_vectors.empty())
            throw ConfigError("build_support_reps: support scenes contain no positive proposal "
                              "for class " + std::to_string(world_class));

        std::vector<std::pair<double, double>> ladder{cfg.neg_iou_band};
        ladder.insert(ladder.end(), cfg.fallback_bands.begin(), cfg.fallback_bands.end());

        std::vector<Vec> candidates;
        std::vector<std::uint64_t> cand_scene;
        std::vector<int> cand_idx;
        for (const auto& band : ladder) {
            for (std::size_t s = 0; s < scenes.size(); ++s) {
                for (std::size_t pi = 0; pi < scenes[s].proposals.size(); ++pi) {
                    const double v = same_class_iou(scenes[s].proposals[pi], scenes[s], world_class);
                    if (v > band.first && v < band.second) {
                        candidates.push_back(embs[s][pi].e_neg);
                        cand_scene.push_back(scenes[s].id);
                        cand_idx.push_back(static_cast<int>(pi));
                    }
                }
            }
            if (!candidates.empty()) break;  // stop at the first non-empty band
        }

        const std::vector<int> picked =
            select_hard_negatives(candidates, cfg.k_negatives, cfg.strategy, mix_seed(seed, static_cast<std::uint64_t>(c)));
        for (int i : picked) {
            out.neg_vectors.push_back(candidates[static_cast<std::size_t>(i)]);
            out.neg_scene_ids.push_back(cand_scene[static_cast<std::size_t>(i)]);
            out.neg_proposal_idx.push_back(cand_idx[static_cast<std::size_t>(i)]);
        }
    }
    return reps;
}

RepBank make_episode_bank(const SupportReps& reps, int embed_dim) {
    RepBank bank;
    bank.n_classes = static_cast<int>(reps.classes.size());
    bank.n_reps = 0;  // ragged
    bank.embed_dim = embed_dim;
    bank.classes.resize(reps.classes.size());
    for (std::size_t c = 0; c < reps.classes.size(); ++c)
        replace_class_reps(bank, static_cast<int>(c), reps.classes[c].pos_vectors,
                           reps.classes[c].neg_vectors);
    return bank;
}

namespace {

std::vector<Detection> detect_impl(const Model& model, const RepBank& bank,
                                   const SyntheticScene& query, const InferenceConfig& cfg,
                                   const ProbConfig& prob_cfg) {
    std::vector<Vec> feats;
    feats.reserve(query.proposals.size());
    for (const auto& p : query.proposals) feats.push_back(p.feature);
    const std::vector<NPEmbedding> embs = forward_batch(model.net, feats);

    std::vector<Detection> dets;
    for (std::size_t pi = 0; pi < query.proposals.size(); ++pi) {
        const ClassDistances dists = min_distances(bank, embs[pi]);
        const std::vector<double> p = class_probability(dists, prob_cfg);
        for (int c = 0; c < bank.n_classes; ++c) {
            const double score = p[static_cast<std::size_t>(c)];
            if (score >= cfg.score_thresh) dets.push_back({query.proposals[pi].box, c, score});
        }
    }
    if (cfg.nms_prefilter) dets = nms(dets, cfg.nms_iou);
    return soft_nms(dets, cfg.softnms_iou, cfg.softnms_floor);
}

}  // namespace

std::vector<Detection> detect(const Model& model, const RepBank& episode_bank,
                              const SyntheticScene& query, const InferenceConfig& cfg,
                              const ProbConfig& prob_cfg) {
    return detect_impl(model, episode_bank, query, cfg, prob_cfg);
}

std::vector<Detection> pos_only_detect(const Model& model, const RepBank& episode_bank,
                                       const SyntheticScene& query, const InferenceConfig& cfg,
                                       const ProbConfig& prob_cfg) {
    ProbConfig pos_cfg = prob_cfg;
    pos_cfg.beta = 0.0;  // Eq reduces to exp(-d_pos / (2 sigma^2))
    return detect_impl(model, episode_bank, query, cfg, pos_cfg);
}

}  // namespace npmd
