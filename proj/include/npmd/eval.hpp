#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "npmd/inference.hpp"

namespace npmd {

struct EvalProtocol {
    int way = 5;
    int shot = 1;
    int n_episodes = 200;
    std::uint64_t seed = 99;

    void validate() const;
};

enum class InferenceMode { NP, PosOnly, Oracle };

const char* to_string(InferenceMode m);

struct EpisodeEval {
    std::uint64_t episode_seed = 0;
    std::vector<int> class_ids;
    std::vector<double> ap;  // NaN for classes with no query ground truth
    double map = 0.0;        // mean over classes with ground truth
    int valid_classes = 0;
};

struct EvalReport {
    EvalProtocol protocol;
    InferenceMode mode = InferenceMode::NP;
    std::vector<EpisodeEval> episodes;
    double mean_map = 0.0;
    double std_map = 0.0;
    bool empty = true;  // flagged when there are no valid episodes
};

// All-point interpolated average precision at the given IoU threshold.
// Detections are matched greedily in score order to the highest-IoU
// unmatched ground truth of the same group (ties -> lowest ground-truth
// index); matches require IoU strictly above iou_thresh. Returns NaN when
// there are neither ground truths nor detections, 0 when ground truths are
// absent but detections exist.
double average_precision_grouped(const std::vector<Detection>& dets,
                                 const std::vector<int>& det_group, const std::vector<Box>& gts,
                                 const std::vector<int>& gt_group, double iou_thresh);

// Single-group convenience wrapper.
double average_precision(const std::vector<Detection>& dets, const std::vector<Box>& gts,
                         double iou_thresh = 0.5);

// Upper-bound scorer used for pipeline sanity: the class comes from the
// nearest prototype among the episode classes, the score from the
// proposal's best IoU with that class's ground truths.
std::vector<Detection> oracle_detect(const World& world, const SyntheticScene& query,
                                     const std::vector<int>& episode_class_ids,
                                     const InferenceConfig& cfg);

// Runs seeded episodes: support representatives, query detection, per-class
// AP at IoU 0.5, episode mAP, and the mean/std aggregate. Episodes are
// evaluated in parallel and aggregated in index order. model may be null
// only for InferenceMode::Oracle.
EvalReport run_episodes(const Model* model, const World& world, const EvalProtocol& protocol,
                        const InferenceConfig& cfg, const ProbConfig& prob_cfg,
                        InferenceMode mode = InferenceMode::NP);

// One axis assignment of the ablation grid.
struct AblationCell {
    std::optional<SelectionStrategy> strategy;
    std::optional<double> beta;
    std::optional<std::pair<double, double>> iou_band;
    std::optional<InferenceMode> inference;
    std::optional<bool> single_embedding;  // requires a per-cell retrain
    EvalReport report;
};

struct AblationGrid {
    std::vector<SelectionStrategy> strategies;
    std::vector<double> betas;
    std::vector<std::pair<double, double>> iou_bands;
    std::vector<InferenceMode> inference_modes;
    std::vector<bool> embeddings;  // false = NP, true = single
};

// Everything a retraining cell needs; dataset/train configs may be omitted
// when the grid has no embedding axis.
struct AblationContext {
    const Model* model = nullptr;
    const World* world = nullptr;
    const Dataset* dataset = nullptr;
    EmbedConfig embed_cfg;
    TrainConfig train_cfg;
    LossConfig loss_cfg;
    ProbConfig prob_cfg;
    InferenceConfig infer_cfg;
    EvalProtocol protocol;
};

// Cross product of the grid axes; every cell shares the protocol seed so
// episode sets are paired across cells.
std::vector<AblationCell> run_ablation(const AblationGrid& grid, const AblationContext& ctx);

}  // namespace npmd
