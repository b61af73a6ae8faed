#include "npmd/synth_world.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <random>

#include "npmd/parallel.hpp"
#include "npmd/rng.hpp"

namespace npmd {

void WorldConfig::validate() const {
    if (n_base_classes < 2) throw ConfigError("WorldConfig: n_base_classes must be >= 2");
    if (n_novel_classes < 1) throw ConfigError("WorldConfig: n_novel_classes must be >= 1");
    if (feature_dim < 2) throw ConfigError("WorldConfig: feature_dim must be >= 2");
    if (canvas_size <= 0.0) throw ConfigError("WorldConfig: canvas_size must be > 0");
    if (objects_min < 1 || objects_max < objects_min)
        throw ConfigError("WorldConfig: objects_per_scene range invalid");
    if (proposals_per_scene < 8) throw ConfigError("WorldConfig: proposals_per_scene must be >= 8");
    if (scenes_per_base_class < 1) throw ConfigError("WorldConfig: scenes_per_base_class must be >= 1");
    if (episode_query_scenes < 1) throw ConfigError("WorldConfig: episode_query_scenes must be >= 1");
    if (!(gt_size_min > 0.0) || gt_size_max < gt_size_min || gt_size_max > canvas_size)
        throw ConfigError("WorldConfig: gt size range invalid");
    if (noise_scale < 0.0) throw ConfigError("WorldConfig: noise_scale must be >= 0");
    if (blend_exponent <= 0.0) throw ConfigError("WorldConfig: blend_exponent must be > 0");
    if (!(max_blend > 0.0 && max_blend <= 1.0))
        throw ConfigError("WorldConfig: max_blend must be in (0,1]");
    if (partial_object_ratio < 0.0 || partial_object_ratio >= 1.0)
        throw ConfigError("WorldConfig: partial_object_ratio must be in [0,1)");
    if (box_scale_jitter < 0.0 || box_scale_jitter >= 0.5)
        throw ConfigError("WorldConfig: box_scale_jitter must be in [0, 0.5)");
}

std::vector<Vec> gen_prototypes(const WorldConfig& config, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::vector<Vec> protos;
    protos.reserve(static_cast<std::size_t>(config.total_classes()));
    for (int c = 0; c < config.total_classes(); ++c)
        protos.push_back(random_unit_vector(config.feature_dim, rng));
    return protos;
}

std::vector<std::vector<double>> prototype_dots(const std::vector<Vec>& prototypes) {
    const std::size_t n = prototypes.size();
    std::vector<std::vector<double>> dots(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) dots[i][j] = dot(prototypes[i], prototypes[j]);
    return dots;
}

World make_world(const WorldConfig& config) {
    config.validate();
    return World{config, gen_prototypes(config, config.seed)};
}

namespace {

// Bands that must be populated per ground truth, with relative slot weights.
// The (0.2,0.3) and (0.7,1.0] bands carry double weight: they feed the
// negative/positive proposal pools.
struct BandSpec {
    double lo, hi;
};
constexpr BandSpec kBandCycle[] = {
    {0.7, 1.0}, {0.2, 0.3}, {0.0, 0.1}, {0.1, 0.2}, {0.3, 0.4}, {0.7, 1.0}, {0.2, 0.3},
};
constexpr double kPartialIoUCeiling = 0.4;
constexpr double kPartialBlend = 0.5;
constexpr double kBackgroundIoUCap = 0.05;

// Box translated from gt along a random direction so that its IoU with gt
// equals target (bisection on the shift radius; IoU is monotone in it).
Box box_with_target_iou(const Box& gt, double target, double scale_jitter, Rng& rng) {
    double w = gt.x2 - gt.x1;
    double h = gt.y2 - gt.y1;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    if (scale_jitter > 0.0 && uni(rng) < 0.5) {
        std::uniform_real_distribution<double> js(1.0 - scale_jitter, 1.0 + scale_jitter);
        const double sw = js(rng), sh = js(rng);
        const double cx = 0.5 * (gt.x1 + gt.x2), cy = 0.5 * (gt.y1 + gt.y2);
        Box scaled(cx - 0.5 * w * sw, cy - 0.5 * h * sh, cx + 0.5 * w * sw, cy + 0.5 * h * sh);
        if (iou(scaled, gt) >= target) {
            w *= sw;
            h *= sh;
        }
    }
    const double cx = 0.5 * (gt.x1 + gt.x2), cy = 0.5 * (gt.y1 + gt.y2);
    const Box base(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * 3.14159265358979323846);
    const double theta = ang(rng);
    const double dx = std::cos(theta), dy = std::sin(theta);

    auto shifted = [&](double r) {
        return Box(base.x1 + r * dx, base.y1 + r * dy, base.x2 + r * dx, base.y2 + r * dy);
    };
    double lo = 0.0, hi = (gt.x2 - gt.x1) + (gt.y2 - gt.y1) + w + h;
    for (int it = 0; it < 64; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (iou(shifted(mid), gt) > target)
            lo = mid;
        else
            hi = mid;
    }
    return shifted(0.5 * (lo + hi));
}

double band_target(const BandSpec& band, Rng& rng) {
    const double inset = 0.005 * (band.hi - band.lo);
    std::uniform_real_distribution<double> uni(band.lo + inset, band.hi - inset);
    return uni(rng);
}

}  // namespace

SyntheticScene gen_scene(const World& world, std::span<const int> object_classes,
                         std::uint64_t scene_seed) {
    const WorldConfig& cfg = world.config;
    if (object_classes.empty()) throw ConfigError("gen_scene: needs at least one object class");
    for (int c : object_classes)
        if (c < 0 || c >= cfg.total_classes()) throw ConfigError("gen_scene: class id out of range");

    Rng rng = make_rng(scene_seed);
    SyntheticScene scene;
    scene.id = scene_seed;

    std::uniform_real_distribution<double> usize(cfg.gt_size_min, cfg.gt_size_max);
    for (int c : object_classes) {
        const double w = usize(rng), h = usize(rng);
        std::uniform_real_distribution<double> ux(0.0, cfg.canvas_size - w);
        std::uniform_real_distribution<double> uy(0.0, cfg.canvas_size - h);
        const double x1 = ux(rng), y1 = uy(rng);
        scene.gts.push_back({Box(x1, y1, x1 + w, y1 + h), c});
    }

    const int n_gt = static_cast<int>(scene.gts.size());
    const int budget_overlap = static_cast<int>(std::lround(0.7 * cfg.proposals_per_scene));
    const int budget_bg = cfg.proposals_per_scene - budget_overlap;

    // Overlap proposals: per ground truth, an exact copy plus band-cycled
    // jitters; quota split as evenly as possible.
    for (int g = 0; g < n_gt; ++g) {
        const int quota = budget_overlap / n_gt + (g < budget_overlap % n_gt ? 1 : 0);
        if (quota < 1) continue;
        const Box& gt = scene.gts[static_cast<std::size_t>(g)].box;
        scene.proposals.push_back({gt, {}});  // exact copy, IoU 1
        const int n_cycle = static_cast<int>(std::size(kBandCycle));
        for (int s = 1; s < quota; ++s) {
            const BandSpec& band = kBandCycle[static_cast<std::size_t>((s - 1) % n_cycle)];
            const double target = band_target(band, rng);
            scene.proposals.push_back({box_with_target_iou(gt, target, cfg.box_scale_jitter, rng), {}});
        }
    }

    // Background boxes: resampled until nearly disjoint from every ground
    // truth; the least-overlapping attempt is kept if the cap is never met.
    for (int b = 0; b < budget_bg; ++b) {
        Box best_box(0, 0, 1, 1);
        double best_overlap = std::numeric_limits<double>::infinity();
        for (int attempt = 0; attempt < 50; ++attempt) {
            const double w = usize(rng), h = usize(rng);
            std::uniform_real_distribution<double> ux(0.0, cfg.canvas_size - w);
            std::uniform_real_distribution<double> uy(0.0, cfg.canvas_size - h);
            const double x1 = ux(rng), y1 = uy(rng);
            const Box cand(x1, y1, x1 + w, y1 + h);
            double overlap = 0.0;
            for (const auto& gt : scene.gts) overlap = std::max(overlap, iou(cand, gt.box));
            if (overlap < best_overlap) {
                best_overlap = overlap;
                best_box = cand;
            }
            if (overlap <= kBackgroundIoUCap) break;
        }
        scene.proposals.push_back({best_box, {}});
    }

    // Features: blend of the best-overlap prototype and seeded noise.
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (auto& prop : scene.proposals) {
        double best_iou = 0.0;
        int best_class = scene.gts.front().class_id;
        for (const auto& gt : scene.gts) {
            const double v = iou(prop.box, gt.box);
            if (v > best_iou) {
                best_iou = v;
                best_class = gt.class_id;
            }
        }
        const Vec& proto = world.prototypes[static_cast<std::size_t>(best_class)];
        const Vec noise_dir = random_unit_vector(cfg.feature_dim, rng);
        const bool partial = best_iou > 0.0 && best_iou < kPartialIoUCeiling &&
                             uni(rng) < cfg.partial_object_ratio;
        const double w = partial
                             ? kPartialBlend
                             : cfg.max_blend * std::pow(std::clamp(best_iou, 0.0, 1.0), cfg.blend_exponent);
        Vec f(static_cast<std::size_t>(cfg.feature_dim), 0.0);
        for (int d = 0; d < cfg.feature_dim; ++d)
            f[static_cast<std::size_t>(d)] = w * proto[static_cast<std::size_t>(d)] +
                                             (1.0 - w) * cfg.noise_scale * noise_dir[static_cast<std::size_t>(d)];
        if (normalize_unit(f) == 0.0) f = noise_dir;  // zero blend -> pure noise direction
        prop.feature = std::move(f);
    }
    return scene;
}

Dataset gen_dataset(const WorldConfig& config) {
    Dataset ds;
    ds.world = make_world(config);

    struct SceneSpec {
        std::vector<int> classes;
        std::uint64_t seed;
    };
    std::vector<SceneSpec> specs;
    Rng rng = make_rng(mix_seed(config.seed, 0xD5));
    std::uniform_int_distribution<int> uobj(config.objects_min, config.objects_max);
    std::uniform_int_distribution<int> ubase(0, config.n_base_classes - 1);
    for (int c = 0; c < config.n_base_classes; ++c) {
        for (int s = 0; s < config.scenes_per_base_class; ++s) {
            SceneSpec spec;
            spec.classes.push_back(c);  // anchor object
            const int n_obj = uobj(rng);
            for (int o = 1; o < n_obj; ++o) spec.classes.push_back(ubase(rng));
            spec.seed = mix_seed(config.seed,
                                 (static_cast<std::uint64_t>(c) << 24) | static_cast<std::uint64_t>(s));
            specs.push_back(std::move(spec));
        }
    }

    ds.scenes.resize(specs.size());
    parallel_for(specs.size(), [&](std::size_t i) {
        ds.scenes[i] = gen_scene(ds.world, specs[i].classes, specs[i].seed);
    });
    return ds;
}

Episode gen_episode(const World& world, int way, int shot, std::uint64_t seed) {
    const WorldConfig& cfg = world.config;
    if (way < 1 || shot < 1) throw ConfigError("gen_episode: way and shot must be >= 1");
    if (way > cfg.n_novel_classes)
        throw ConfigError("gen_episode: way exceeds the number of novel classes");

    Episode ep;
    ep.way = way;
    ep.shot = shot;

    Rng rng = make_rng(mix_seed(seed, 0xE9));
    const std::vector<int> picks = sample_without_replacement(cfg.n_novel_classes, way, rng);
    for (int p : picks) ep.class_ids.push_back(cfg.n_base_classes + p);

    std::uniform_int_distribution<int> uobj(cfg.objects_min, cfg.objects_max);
    std::uniform_int_distribution<int> uclass(0, way - 1);

    ep.support.resize(static_cast<std::size_t>(way));
    for (int c = 0; c < way; ++c) {
        for (int s = 0; s < shot; ++s) {
            std::vector<int> classes{ep.class_ids[static_cast<std::size_t>(c)]};
            const int n_obj = uobj(rng);
            for (int o = 1; o < n_obj; ++o)
                classes.push_back(ep.class_ids[static_cast<std::size_t>(uclass(rng))]);
            const std::uint64_t sseed =
                mix_seed(seed, 0x500000ULL + static_cast<std::uint64_t>(c * shot + s));
            ep.support[static_cast<std::size_t>(c)].push_back(gen_scene(world, classes, sseed));
        }
    }

    // Queries draw object classes from a repeating shuffled cycle so class
    // occurrence stays balanced across the pool.
    std::vector<int> cycle(static_cast<std::size_t>(way));
    for (int i = 0; i < way; ++i) cycle[static_cast<std::size_t>(i)] = i;
    std::shuffle(cycle.begin(), cycle.end(), rng);
    std::size_t cursor = 0;
    for (int q = 0; q < cfg.episode_query_scenes; ++q) {
        const int n_obj = uobj(rng);
        std::vector<int> classes;
        for (int o = 0; o < n_obj; ++o) {
            classes.push_back(ep.class_ids[static_cast<std::size_t>(cycle[cursor])]);
            cursor = (cursor + 1) % cycle.size();
        }
        const std::uint64_t qseed = mix_seed(seed, 0x900000ULL + static_cast<std::uint64_t>(q));
        ep.queries.push_back(gen_scene(world, classes, qseed));
    }
    return ep;
}

}  // namespace npmd
