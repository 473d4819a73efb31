#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "textkernel/raster.hpp"

namespace textkernel {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

// Closed ring of vertices in image pixel coordinates (x right, y down; the
// last vertex connects back to the first). The validating constructor rejects
// rings with fewer than three vertices or consecutive duplicates closer than
// 1e-9 (including last->first) and normalizes the ring to positive signed
// area. Simplicity is assumed, not checked.
class Polygon {
public:
    explicit Polygon(std::vector<Point> vertices);

    // Skips validation and orientation normalization. For internal producers
    // whose output is degenerate on purpose (zero-width rectangles from
    // collinear input, self-touching traced contours).
    static Polygon unchecked(std::vector<Point> vertices);

    const std::vector<Point>& vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }
    const Point& operator[](std::size_t i) const { return vertices_[i]; }

private:
    Polygon() = default;
    std::vector<Point> vertices_;
};

struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;
    std::optional<double> score;
    std::optional<int> label;
    bool ignore = false;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
};

// Signed area of a ring by the shoelace formula; positive when the ring is
// counter-clockwise in this y-down coordinate system's orientation convention
// (we treat the standard shoelace sign as-is, so "CCW" below means positive).
double signed_area(const std::vector<Point>& ring);

double polygon_area(const Polygon& p);
double polygon_perimeter(const Polygon& p);

// Area centroid. Falls back to the vertex mean when the area underflows.
Point polygon_centroid(const Polygon& p);

// Parallel offset of a simple polygon. d > 0 dilates with round joins at
// diverging corners (arcs subdivided so no segment spans more than 15
// degrees); d < 0 erodes with miter joins, limit 2 (beveled past the limit).
// The raw offset ring is resolved by winding-number union, so erosion may
// split the polygon into several pieces or collapse it entirely (empty
// result). Hole loops that a dilation seals off are discarded; only outer
// boundaries are returned. d == 0 returns the input unchanged.
std::vector<Polygon> offset_polygon(const Polygon& p, double d);

Box bounding_box(const Polygon& p);

// Minimum-area enclosing rotated rectangle via rotating calipers over the
// convex hull. Always 4 vertices; collinear input yields a zero-width
// rectangle along the segment.
Polygon min_area_rect(const Polygon& p);

// Even-odd scanline fill: pixel (row, col) is set iff its center
// (col + 0.5, row + 0.5) is inside the polygon, with a half-open boundary
// rule so abutting polygons never claim a pixel twice.
Mask rasterize_fill(const Polygon& p, int width, int height);

double box_iou(const Box& a, const Box& b);

struct PolygonOverlap {
    std::int64_t intersection = 0;
    std::int64_t union_ = 0;
    std::int64_t area_a = 0;
    std::int64_t area_b = 0;
};

// Discrete overlap: both polygons rasterized onto their joint integer
// bounding grid, `resolution` samples per pixel along each axis, counts in
// sample cells.
PolygonOverlap polygon_overlap(const Polygon& a, const Polygon& b, int resolution = 1);

double polygon_iou(const Polygon& a, const Polygon& b, int resolution = 1);

}  // namespace textkernel
