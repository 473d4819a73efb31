#pragma once

#include <optional>
#include <string>
#include <vector>

#include "textkernel/geometry.hpp"
#include "textkernel/raster.hpp"

namespace textkernel {

struct Annotation {
    Polygon polygon;
    bool ignore = false;
    std::optional<std::string> text;
};

// Rows of the supervision-mode table: which channels are supervised and which
// class-weight vector applies.
enum class SupervisionMode {
    kKernelOnly = 1,        // kernel vs rest, unweighted
    kKernelWkn = 2,         // kernel vs rest, two-class weights
    kKernelWkbn = 3,        // kernel vs rest, three-class weights by true label
    kKernelBorderWkbn = 4,  // full three-class, three-class weights
    kTextWkbn = 5,          // text (kernel+border) vs non-text, three-class weights
};

// D = A(1 - r^2) / L for shrink ratio r in (0, 1].
double shrink_offset(const Polygon& p, double r);

// Inward offset by shrink_offset. May split or collapse (empty result).
std::vector<Polygon> shrink_polygon(const Polygon& p, double r);

// Per-pixel classes: 0 non-text, 1 text kernel, 2 text border. Borders of all
// instances are painted first, then all kernels, so a kernel always wins over
// another instance's border. Ignore annotations paint nothing here. When an
// instance's shrink collapses, its kernel falls back to the polygon scaled
// about its centroid by r; `collapse_count`, when given, receives the number
// of such fallbacks.
ClassMask generate_class_mask(const std::vector<Annotation>& annots, int width, int height,
                              double r = 0.6, int* collapse_count = nullptr);

// Union of rasterized non-ignore polygons.
Mask generate_text_mask(const std::vector<Annotation>& annots, int width, int height);

// Union of rasterized ignore polygons.
Mask generate_ignore_mask(const std::vector<Annotation>& annots, int width, int height);

// Axis-aligned bounds of every annotation; non-ignore boxes carry label 1
// (text), ignore annotations yield ignore-flagged boxes.
std::vector<Box> generate_tdm_boxes(const std::vector<Annotation>& annots);

}  // namespace textkernel
