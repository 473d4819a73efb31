#pragma once

#include <utility>
#include <vector>

#include "textkernel/geometry.hpp"
#include "textkernel/labelgen.hpp"

namespace textkernel {

struct Detection {
    Polygon polygon;
    double score = 0.0;
};

struct MatchResult {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    std::vector<std::pair<int, int>> matches;  // (detection index, gt index)
};

// One-to-one greedy matching at the given polygon-IoU threshold. Detections
// whose intersection-over-own-area with any ignore region exceeds 0.5 are
// discarded first; ignore gts never count. Detections are processed in
// descending score (ties to the lower input index) and each takes the
// unmatched gt of highest IoU when that IoU >= iou_thr.
MatchResult match_image(const std::vector<Detection>& dets, const std::vector<Annotation>& gts,
                        double iou_thr = 0.5);

struct PerImageStats {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    double ms = 0.0;
};

struct EvalReport {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double fmeasure = 0.0;
    std::vector<PerImageStats> per_image;
    double fps = 0.0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
};

// Micro-average: counts summed over images, then P = tp/(tp+fp),
// R = tp/(tp+fn), F = 2PR/(P+R), each 0 when its denominator is 0.
// fps = images / total seconds (0 without timings).
EvalReport aggregate(const std::vector<PerImageStats>& per_image);

}  // namespace textkernel
