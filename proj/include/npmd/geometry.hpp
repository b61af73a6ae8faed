#pragma once

#include <utility>
#include <vector>

#include "npmd/error.hpp"

namespace npmd {

// Axis-aligned box in continuous scene coordinates. Strictly positive area.
struct Box {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

    Box() = default;
    Box(double ax1, double ay1, double ax2, double ay2) : x1(ax1), y1(ay1), x2(ax2), y2(ay2) {
        if (!(x1 < x2) || !(y1 < y2)) throw ConfigError("Box: requires x1 < x2 and y1 < y2");
    }

    double area() const { return (x2 - x1) * (y2 - y1); }
    bool operator==(const Box&) const = default;
};

struct Detection {
    Box box;
    int class_id = 0;
    double score = 0.0;  // in [0, 1]
};

struct ProposalLabel {
    enum class Kind { Positive, Negative, Ignored };
    Kind kind = Kind::Ignored;
    int class_id = -1;  // valid for Positive/Negative

    static ProposalLabel positive(int c) { return {Kind::Positive, c}; }
    static ProposalLabel negative(int c) { return {Kind::Negative, c}; }
    static ProposalLabel ignored() { return {Kind::Ignored, -1}; }
    bool operator==(const ProposalLabel&) const = default;
};

double iou(const Box& a, const Box& b);

// Labels a proposal against the ground truth of maximal IoU (ties broken by
// lowest class id). Positive above pos_thresh, Negative strictly inside
// neg_band, Ignored otherwise (and for empty gts).
ProposalLabel label_proposal(const Box& p, const std::vector<std::pair<Box, int>>& gts,
                             double pos_thresh, std::pair<double, double> neg_band);

// Greedy per-class NMS: keep a detection iff its IoU with every already-kept
// detection of the same class is <= iou_thresh. Output ordered by
// (score desc, insertion index), scores unchanged.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh);

// Linear soft-NMS, per class: each round takes the highest-scoring remaining
// detection, then rescales every remaining same-class detection with
// IoU > iou_thresh by (1 - IoU). Detections whose score drops below
// score_floor are discarded. Output in pick order (non-increasing score).
std::vector<Detection> soft_nms(const std::vector<Detection>& dets, double iou_thresh,
                                double score_floor);

}  // namespace npmd
