#pragma once

#include <vector>

#include "textkernel/geometry.hpp"
#include "textkernel/raster.hpp"

namespace textkernel {

// Strict comparison: a pixel is foreground iff p > threshold.
Mask binarize(const ScoreMap& prob, double threshold = 0.65);

struct Components {
    LabelMap labels;  // 0 background, 1..count components
    int count = 0;
};

// Two-pass union-find labeling; labels numbered 1..count in first-encounter
// row-major order.
Components connected_components(const Mask& bin, int connectivity = 8);

// Outer boundary of one component as a polygon on the pixel-corner lattice
// (so re-rasterizing reproduces the component exactly, holes aside). Runs of
// collinear vertices are merged (tolerance 1e-6). A single pixel yields its
// unit square. Unknown component id is an error.
Polygon trace_contour(const LabelMap& labels, int component_id);

// Outward offset by D' = A * r' / L; r' == 0 returns the input unchanged.
// When the offset splits, the largest piece by area is kept.
Polygon unclip(const Polygon& kernel_poly, double r_prime);

// Mean probability over the component's pixels.
double score_component(const ScoreMap& prob, const LabelMap& labels, int component_id);

enum class OutputMode { kPolygon, kMinAreaRect };

struct DetectConfig {
    double bin_thr = 0.65;
    double r_prime = 1.5;
    double box_score_thr = 0.6;
    int min_area_px = 4;
    int connectivity = 8;
    OutputMode output_mode = OutputMode::kPolygon;
};

struct DetectionResult {
    std::vector<Polygon> polygons;
    std::vector<double> scores;
    int component_count = 0;
    int kept_count = 0;
    double elapsed_ms = 0.0;
};

// Full pipeline: binarize -> CCL -> per-component score/area filtering ->
// contour -> unclip (-> min-area rect). The kernel channel is channel 1 of
// 3-channel maps and channel 0 of 1-channel maps; other channel counts are
// rejected.
DetectionResult detect(const ProbMap& prob, const DetectConfig& cfg = {});

}  // namespace textkernel
