#pragma once

#include <cstdint>
#include <vector>

#include "textkernel/geometry.hpp"

namespace textkernel {

struct AnchorSpec {
    std::vector<int> strides = {4, 8, 16, 32, 64};
    std::vector<double> aspect_ratios = {0.2, 0.5, 1.0, 2.0, 5.0};
    double base_scale = 8.0;  // base size = base_scale * stride per level
};

// One anchor set per feature cell: centers ((j+0.5)*stride, (i+0.5)*stride),
// ceil(W/stride) x ceil(H/stride) cells per level, one box per aspect ratio
// with w = s*sqrt(rho), h = s/sqrt(rho), s = base_scale*stride. Anchors are
// not clipped; out-of-bounds ones are handled at assignment time. Level order,
// then row-major cells, then ratio order.
std::vector<Box> build_anchors(const AnchorSpec& spec, int image_w, int image_h);

// Pyramid level index of each anchor emitted by build_anchors, same order.
std::vector<int> anchor_levels(const AnchorSpec& spec, int image_w, int image_h);

struct BoxDelta {
    double tx = 0.0;
    double ty = 0.0;
    double tw = 0.0;
    double th = 0.0;
};

// Faster R-CNN parameterization: tx = (gx-ax)/aw, ty = (gy-ay)/ah,
// tw = ln(gw/aw), th = ln(gh/ah). Degenerate sizes are errors.
BoxDelta encode_box(const Box& anchor, const Box& gt);
Box decode_box(const Box& anchor, const BoxDelta& t);

enum class AnchorLabel : std::int8_t { kNegative = 0, kPositive = 1, kIgnore = -1 };

struct AssignmentResult {
    std::vector<AnchorLabel> labels;
    std::vector<int> matched_gt;      // gt index for positives, -1 otherwise
    std::vector<BoxDelta> targets;    // valid where positive
};

struct RpnConfig {
    double pos_iou = 0.7;
    double neg_iou = 0.3;
};

// RPN anchor assignment. Out-of-bounds anchors and anchors overlapping an
// ignore-flagged gt at IoU >= neg_iou are forced to ignore and excluded from
// matching. Among the rest: positive when max IoU >= pos_iou or when the
// anchor is the best match of some gt with IoU > 0 (ties to the lowest anchor
// index, gt argmax ties to the lowest gt index); negative when max IoU <
// neg_iou; ignore otherwise.
AssignmentResult assign_rpn(const std::vector<Box>& anchors, const std::vector<Box>& gts,
                            int image_w, int image_h, const RpnConfig& cfg = {});

// Greedy descending-score suppression, ties to the lower input index; boxes
// with IoU > threshold against a kept box are dropped. Survivors are returned
// in suppression (descending score) order.
std::vector<Box> nms(const std::vector<Box>& boxes, double iou_threshold);

struct ProposalConfig {
    int pre_nms_k = 1000;
    double nms_thr = 0.7;
    int post_nms_k = 300;
    double min_size = 1.0;
};

// Decode deltas onto anchors, clip to the image, drop boxes with a side
// < min_size, keep the top pre_nms_k by score per level, NMS jointly, keep
// the top post_nms_k.
std::vector<Box> select_proposals(const std::vector<Box>& anchors,
                                  const std::vector<BoxDelta>& deltas,
                                  const std::vector<double>& scores,
                                  const std::vector<int>& levels, int image_w, int image_h,
                                  const ProposalConfig& cfg = {});

struct RoiSample {
    int proposal = -1;  // index into the proposal list
    int label = 0;      // 1 text, 0 background
    int matched_gt = -1;
    BoxDelta target;    // valid for label 1
};

struct RoiConfig {
    double fg_iou = 0.5;
    double bg_iou_lo = 0.1;
    int batch = 128;
    double fg_fraction = 0.25;
};

// RoI target sampling: proposals with max IoU >= fg_iou become text with a
// regression target against their matched gt; IoU in [bg_iou_lo, fg_iou)
// becomes background; others are excluded. Up to batch*fg_fraction foreground
// then background to fill, subsampled with a seeded deterministic generator.
// Ignore-flagged gts neither match nor produce foreground.
std::vector<RoiSample> assign_rois(const std::vector<Box>& proposals, const std::vector<Box>& gts,
                                   std::uint64_t seed, const RoiConfig& cfg = {});

}  // namespace textkernel
