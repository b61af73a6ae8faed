#include "npmd/geometry.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>

namespace npmd {

double iou(const Box& a, const Box& b) {
    const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

ProposalLabel label_proposal(const Box& p, const std::vector<std::pair<Box, int>>& gts,
                             double pos_thresh, std::pair<double, double> neg_band) {
    if (pos_thresh <= neg_band.second)
        throw ConfigError("label_proposal: pos_thresh must exceed the negative band");
    if (gts.empty()) return ProposalLabel::ignored();

    double best = -1.0;
    int best_class = -1;
    for (const auto& [box, cls] : gts) {
        const double v = iou(p, box);
        if (v > best || (v == best && cls < best_class)) {
            best = v;
            best_class = cls;
        }
    }
    if (best > pos_thresh) return ProposalLabel::positive(best_class);
    if (best > neg_band.first && best < neg_band.second) return ProposalLabel::negative(best_class);
    return ProposalLabel::ignored();
}

namespace {

// Indices of dets ordered by (score desc, insertion index).
std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dets[a].score > dets[b].score;
    });
    return order;
}

}  // namespace

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh) {
    std::vector<Detection> kept;
    for (std::size_t i : score_order(dets)) {
        const Detection& d = dets[i];
        bool suppressed = false;
        for (const Detection& k : kept) {
            if (k.class_id == d.class_id && iou(k.box, d.box) > iou_thresh) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

std::vector<Detection> soft_nms(const std::vector<Detection>& dets, double iou_thresh,
                                double score_floor) {
    std::vector<Detection> pool = dets;
    std::vector<bool> taken(pool.size(), false);
    std::vector<Detection> out;
    out.reserve(pool.size());

    for (;;) {
        std::size_t best = pool.size();
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (taken[i]) continue;
            if (best == pool.size() || pool[i].score > pool[best].score) best = i;
        }
        if (best == pool.size()) break;
        taken[best] = true;
        if (pool[best].score < score_floor) continue;
        out.push_back(pool[best]);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (taken[i] || pool[i].class_id != pool[best].class_id) continue;
            const double v = iou(pool[i].box, pool[best].box);
            if (v > iou_thresh) pool[i].score *= (1.0 - v);
        }
    }
    return out;
}

}  // namespace npmd
