#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "npmd/geometry.hpp"
#include "npmd/hard_negatives.hpp"
#include "npmd/representatives.hpp"
#include "npmd/synth_world.hpp"
#include "npmd/trainer.hpp"

namespace npmd {

struct InferenceConfig {
    double score_thresh = 0.05;
    double softnms_iou = 0.6;
    double softnms_floor = 0.001;
    double nms_iou = 0.7;
    bool nms_prefilter = false;  // optional hard NMS pass before soft-NMS
    double pos_iou_thresh = 0.7;
    std::pair<double, double> neg_iou_band = {0.2, 0.3};
    // Tried in order when the primary band yields no candidates.
    std::vector<std::pair<double, double>> fallback_bands = {{0.1, 0.2}, {0.0, 0.1}};
    int k_negatives = 5;
    SelectionStrategy strategy = SelectionStrategy::ClusterMin;

    void validate() const;
};

// Support-derived replacement representatives for one episode. Classes are
// indexed in episode order; class_ids maps back to world ids.
struct SupportReps {
    struct PerClass {
        std::vector<Vec> pos_vectors;
        std::vector<Vec> neg_vectors;
        std::vector<std::uint64_t> pos_scene_ids;  // provenance
        std::vector<int> pos_proposal_idx;
        std::vector<std::uint64_t> neg_scene_ids;
        std::vector<int> neg_proposal_idx;
    };
    std::vector<int> class_ids;
    std::vector<PerClass> classes;
};

// Embeds support proposals and harvests per-class representatives:
// positives from proposals with IoU > pos_iou_thresh against a same-class
// ground truth (generator scenes always contain the ground-truth box as a
// proposal, so this is never empty); negatives from the hard IoU band,
// descending the fallback ladder when a band is empty, then reduced with
// select_hard_negatives. A class may end up with no negatives, which the
// scoring fallback handles.
SupportReps build_support_reps(const Model& model, const Episode& episode,
                               const InferenceConfig& cfg, std::uint64_t seed);

// Bank over the episode's classes with the support vectors installed.
RepBank make_episode_bank(const SupportReps& reps, int embed_dim);

// Scores every query proposal against the episode bank: NP-embedding,
// per-class min distances, distance-to-probability mapping, thresholding,
// then (optional) hard NMS and per-class linear soft-NMS. Detection
// class_id is the episode class index; scores descend.
std::vector<Detection> detect(const Model& model, const RepBank& episode_bank,
                              const SyntheticScene& query, const InferenceConfig& cfg,
                              const ProbConfig& prob_cfg);

// detect with beta forced to 0: positive-only scoring, the baseline
// inference that ignores negative representatives.
std::vector<Detection> pos_only_detect(const Model& model, const RepBank& episode_bank,
                                       const SyntheticScene& query, const InferenceConfig& cfg,
                                       const ProbConfig& prob_cfg);

}  // namespace npmd
