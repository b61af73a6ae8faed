#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "npmd/error.hpp"
#include "npmd/geometry.hpp"
#include "npmd/vecmath.hpp"

namespace npmd {

// The synthetic detection world standing in for a backbone + RPN: ground
// truth boxes on a continuous canvas, proposals stratified across IoU bands,
// and features that blend the class prototype with noise according to
// overlap quality.
struct WorldConfig {
    int n_base_classes = 40;
    int n_novel_classes = 10;
    int feature_dim = 64;
    double canvas_size = 100.0;
    int objects_min = 1;
    int objects_max = 3;
    int proposals_per_scene = 64;
    int scenes_per_base_class = 10;
    int episode_query_scenes = 8;
    double gt_size_min = 15.0;
    double gt_size_max = 40.0;
    // Feature blend: w = max_blend * IoU^blend_exponent, feature =
    // normalize(w * prototype + (1 - w) * noise_scale * u).
    double noise_scale = 1.0;
    double blend_exponent = 1.0;
    double max_blend = 0.85;
    // Fraction of overlap proposals with IoU in (0, 0.4) that instead get a
    // fixed half-prototype blend: the informative hard negatives.
    double partial_object_ratio = 0.3;
    double box_scale_jitter = 0.1;
    std::uint64_t seed = 12345;

    int total_classes() const { return n_base_classes + n_novel_classes; }
    bool is_novel(int class_id) const { return class_id >= n_base_classes; }
    void validate() const;
    bool operator==(const WorldConfig&) const = default;
};

struct GroundTruth {
    Box box;
    int class_id = 0;
};

struct Proposal {
    Box box;
    Vec feature;
};

struct SyntheticScene {
    std::uint64_t id = 0;  // the scene seed
    std::vector<GroundTruth> gts;
    std::vector<Proposal> proposals;
};

struct World {
    WorldConfig config;
    std::vector<Vec> prototypes;  // [total_classes], unit norm
};

struct Dataset {
    World world;
    std::vector<SyntheticScene> scenes;  // training scenes, base classes only
};

// N-way K-shot task: per-class support scenes plus a query pool containing
// only the episode's classes.
struct Episode {
    int way = 0;
    int shot = 0;
    std::vector<int> class_ids;                        // world ids
    std::vector<std::vector<SyntheticScene>> support;  // [way][shot]
    std::vector<SyntheticScene> queries;
};

std::vector<Vec> gen_prototypes(const WorldConfig& config, std::uint64_t seed);

// Pairwise prototype dot products (dataset metadata / integrity check).
std::vector<std::vector<double>> prototype_dots(const std::vector<Vec>& prototypes);

World make_world(const WorldConfig& config);

// One scene with the given object classes. Proposals: one exact copy of
// each ground truth box, band-stratified jitters per ground truth covering
// (0,0.1) (0.1,0.2) (0.2,0.3) (0.3,0.4) and (0.7,1.0], and background boxes.
SyntheticScene gen_scene(const World& world, std::span<const int> object_classes,
                         std::uint64_t scene_seed);

// Training scenes over the base classes; scene i of class c is anchored on
// an object of c. Deterministic from config.seed.
Dataset gen_dataset(const WorldConfig& config);

Episode gen_episode(const World& world, int way, int shot, std::uint64_t seed);

}  // namespace npmd
