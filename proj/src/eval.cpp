#include "npmd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "npmd/parallel.hpp"
#include "npmd/rng.hpp"

namespace npmd {

void EvalProtocol::validate() const {
    if (way < 1 || shot < 1) throw ConfigError("EvalProtocol: way and shot must be >= 1");
    if (n_episodes < 0) throw ConfigError("EvalProtocol: n_episodes must be >= 0");
}

const char* to_string(InferenceMode m) {
    switch (m) {
        case InferenceMode::NP: return "np";
        case InferenceMode::PosOnly: return "pos";
        case InferenceMode::Oracle: return "oracle";
    }
    return "?";
}

double average_precision_grouped(const std::vector<Detection>& dets,
                                 const std::vector<int>& det_group, const std::vector<Box>& gts,
                                 const std::vector<int>& gt_group, double iou_thresh) {
    if (dets.size() != det_group.size() || gts.size() != gt_group.size())
        throw ConfigError("average_precision: group arrays must match inputs");
    const std::size_t n_gt = gts.size();
    if (n_gt == 0) return dets.empty() ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    if (dets.empty()) return 0.0;

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

    std::vector<bool> matched(n_gt, false);
    std::vector<bool> tp(dets.size(), false);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::size_t di = order[rank];
        double best_iou = iou_thresh;
        std::size_t best_gt = n_gt;
        for (std::size_t gi = 0; gi < n_gt; ++gi) {
            if (matched[gi] || gt_group[gi] != det_group[di]) continue;
            const double v = iou(dets[di].box, gts[gi]);
            if (v > best_iou) {  // strict: a tie on IoU keeps the earlier (lower) gt
                best_iou = v;
                best_gt = gi;
            }
        }
        if (best_gt < n_gt) {
            matched[best_gt] = true;
            tp[rank] = true;
        }
    }

    // Precision envelope over the ranked list, integrated at every recall step.
    const std::size_t n = dets.size();
    std::vector<double> precision(n), recall(n);
    int tp_cum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (tp[i]) ++tp_cum;
        precision[i] = static_cast<double>(tp_cum) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp_cum) / static_cast<double>(n_gt);
    }
    for (std::size_t i = n - 1; i > 0; --i) precision[i - 1] = std::max(precision[i - 1], precision[i]);

    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

double average_precision(const std::vector<Detection>& dets, const std::vector<Box>& gts,
                         double iou_thresh) {
    return average_precision_grouped(dets, std::vector<int>(dets.size(), 0), gts,
                                     std::vector<int>(gts.size(), 0), iou_thresh);
}

std::vector<Detection> oracle_detect(const World& world, const SyntheticScene& query,
                                     const std::vector<int>& episode_class_ids,
                                     const InferenceConfig& cfg) {
    std::vector<Detection> dets;
    for (const auto& prop : query.proposals) {
        int best_c = -1;
        double best_dot = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < episode_class_ids.size(); ++c) {
            const double v =
                dot(prop.feature, world.prototypes[static_cast<std::size_t>(episode_class_ids[c])]);
            if (v > best_dot) {
                best_dot = v;
                best_c = static_cast<int>(c);
            }
        }
        double best_iou = 0.0;
        for (const auto& gt : query.gts)
            if (gt.class_id == episode_class_ids[static_cast<std::size_t>(best_c)])
                best_iou = std::max(best_iou, iou(prop.box, gt.box));
        if (best_iou >= cfg.score_thresh) dets.push_back({prop.box, best_c, best_iou});
    }
    return soft_nms(dets, cfg.softnms_iou, cfg.softnms_floor);
}

namespace {

EpisodeEval eval_episode(const Model* model, const World& world, const EvalProtocol& protocol,
                         const InferenceConfig& cfg, const ProbConfig& prob_cfg, InferenceMode mode,
                         std::uint64_t episode_seed) {
    const Episode episode = gen_episode(world, protocol.way, protocol.shot, episode_seed);

    EpisodeEval out;
    out.episode_seed = episode_seed;
    out.class_ids = episode.class_ids;

    RepBank bank;
    if (mode != InferenceMode::Oracle) {
        const SupportReps reps =
            build_support_reps(*model, episode, cfg, mix_seed(episode_seed, 0x5e1ec7));
        bank = make_episode_bank(reps, model->net.config.embed_dim);
    }

    // Pool detections and ground truths across the query scenes, grouped by
    // query index so matching stays per-scene.
    std::vector<std::vector<Detection>> dets_by_class(static_cast<std::size_t>(episode.way));
    std::vector<std::vector<int>> det_groups(static_cast<std::size_t>(episode.way));
    std::vector<std::vector<Box>> gts_by_class(static_cast<std::size_t>(episode.way));
    std::vector<std::vector<int>> gt_groups(static_cast<std::size_t>(episode.way));

    for (std::size_t q = 0; q < episode.queries.size(); ++q) {
        const SyntheticScene& scene = episode.queries[q];
        std::vector<Detection> dets;
        switch (mode) {
            case InferenceMode::NP: dets = detect(*model, bank, scene, cfg, prob_cfg); break;
            case InferenceMode::PosOnly:
                dets = pos_only_detect(*model, bank, scene, cfg, prob_cfg);
                break;
            case InferenceMode::Oracle:
                dets = oracle_detect(world, scene, episode.class_ids, cfg);
                break;
        }
        for (const auto& d : dets) {
            dets_by_class[static_cast<std::size_t>(d.class_id)].push_back(d);
            det_groups[static_cast<std::size_t>(d.class_id)].push_back(static_cast<int>(q));
        }
        for (const auto& gt : scene.gts) {
            for (int c = 0; c < episode.way; ++c) {
                if (episode.class_ids[static_cast<std::size_t>(c)] == gt.class_id) {
                    gts_by_class[static_cast<std::size_t>(c)].push_back(gt.box);
                    gt_groups[static_cast<std::size_t>(c)].push_back(static_cast<int>(q));
                }
            }
        }
    }

    out.ap.resize(static_cast<std::size_t>(episode.way));
    double sum = 0.0;
    for (int c = 0; c < episode.way; ++c) {
        const std::size_t uc = static_cast<std::size_t>(c);
        if (gts_by_class[uc].empty()) {
            // No query ground truth for this class: excluded from the mean.
            out.ap[uc] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        out.ap[uc] = average_precision_grouped(dets_by_class[uc], det_groups[uc], gts_by_class[uc],
                                               gt_groups[uc], 0.5);
        sum += out.ap[uc];
        ++out.valid_classes;
    }
    out.map = out.valid_classes > 0 ? sum / out.valid_classes
                                    : std::numeric_limits<double>::quiet_NaN();
    return out;
}

}  // namespace

EvalReport run_episodes(const Model* model, const World& world, const EvalProtocol& protocol,
                        const InferenceConfig& cfg, const ProbConfig& prob_cfg,
                        InferenceMode mode) {
    protocol.validate();
    cfg.validate();
    if (mode != InferenceMode::Oracle && model == nullptr)
        throw ConfigError("run_episodes: model required for non-oracle inference");

    EvalReport report;
    report.protocol = protocol;
    report.mode = mode;
    report.episodes.resize(static_cast<std::size_t>(protocol.n_episodes));

    parallel_for(static_cast<std::size_t>(protocol.n_episodes), [&](std::size_t e) {
        report.episodes[e] = eval_episode(model, world, protocol, cfg, prob_cfg, mode,
                                          mix_seed(protocol.seed, e));
    });

    double sum = 0.0;
    int n = 0;
    for (const auto& ep : report.episodes) {
        if (std::isnan(ep.map)) continue;
        sum += ep.map;
        ++n;
    }
    if (n == 0) {
        report.empty = true;
        report.mean_map = std::numeric_limits<double>::quiet_NaN();
        report.std_map = std::numeric_limits<double>::quiet_NaN();
        return report;
    }
    report.empty = false;
    report.mean_map = sum / n;
    double ss = 0.0;
    for (const auto& ep : report.episodes) {
        if (std::isnan(ep.map)) continue;
        ss += (ep.map - report.mean_map) * (ep.map - report.mean_map);
    }
    report.std_map = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    return report;
}

std::vector<AblationCell> run_ablation(const AblationGrid& grid, const AblationContext& ctx) {
    if (ctx.world == nullptr) throw ConfigError("run_ablation: world required");

    auto strategies = grid.strategies;
    auto betas = grid.betas;
    auto bands = grid.iou_bands;
    auto modes = grid.inference_modes;
    auto embeddings = grid.embeddings;
    const bool has_strategy = !strategies.empty();
    const bool has_beta = !betas.empty();
    const bool has_band = !bands.empty();
    const bool has_mode = !modes.empty();
    const bool has_embedding = !embeddings.empty();
    if (has_embedding && ctx.dataset == nullptr)
        throw ConfigError("run_ablation: the embedding axis retrains and needs the dataset");
    for (double b : betas)
        if (b < 0.0 || b >= 1.0) throw ConfigError("run_ablation: beta values must be in [0,1)");

    if (!has_strategy) strategies = {ctx.infer_cfg.strategy};
    if (!has_beta) betas = {ctx.prob_cfg.beta};
    if (!has_band) bands = {ctx.infer_cfg.neg_iou_band};
    if (!has_mode) modes = {InferenceMode::NP};
    if (!has_embedding) embeddings = {ctx.embed_cfg.single_embedding};

    std::vector<AblationCell> cells;
    for (bool single : embeddings) {
        // The embedding axis changes the trained model itself.
        Model retrained;
        const Model* model = ctx.model;
        if (has_embedding) {
            EmbedConfig ec = ctx.embed_cfg;
            ec.single_embedding = single;
            TrainState st =
                train(*ctx.dataset, ctx.train_cfg, ec, ctx.loss_cfg, ctx.prob_cfg, nullptr);
            retrained = std::move(st.model);
            model = &retrained;
        } else if (model == nullptr) {
            throw ConfigError("run_ablation: model required when not retraining");
        }

        for (auto strategy : strategies) {
            for (double beta : betas) {
                for (auto band : bands) {
                    for (auto mode : modes) {
                        AblationCell cell;
                        if (has_strategy) cell.strategy = strategy;
                        if (has_beta) cell.beta = beta;
                        if (has_band) cell.iou_band = band;
                        if (has_mode) cell.inference = mode;
                        if (has_embedding) cell.single_embedding = single;

                        InferenceConfig icfg = ctx.infer_cfg;
                        icfg.strategy = strategy;
                        icfg.neg_iou_band = band;
                        ProbConfig pcfg = ctx.prob_cfg;
                        pcfg.beta = beta;
                        // beta == 0 is exactly positive-only scoring.
                        const InferenceMode run_mode =
                            (mode == InferenceMode::NP && beta == 0.0) ? InferenceMode::PosOnly
                                                                       : mode;
                        cell.report = run_episodes(model, *ctx.world, ctx.protocol, icfg, pcfg,
                                                   run_mode);
                        cells.push_back(std::move(cell));
                    }
                }
            }
        }
    }
    return cells;
}

}  // namespace npmd
