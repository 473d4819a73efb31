#pragma once

// Reference implementations used only by tests. Each is written against the
// textbook definition of the operation, on purpose not sharing code with the
// library, so the two sides can disagree.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <utility>
#include <vector>

#include "textkernel/geometry.hpp"
#include "textkernel/raster.hpp"
#include "textkernel/tdm.hpp"

namespace oracle {

using textkernel::Box;
using textkernel::LabelMap;
using textkernel::Mask;
using textkernel::Point;
using textkernel::Polygon;

constexpr double kPi = 3.14159265358979323846;

// trapezoid form of the shoelace sum
inline double signed_area(const std::vector<Point>& ring) {
    double acc = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const Point& a = ring[i];
        const Point& b = ring[(i + 1) % ring.size()];
        acc += (a.x - b.x) * (a.y + b.y);
    }
    return acc / 2.0;
}

inline double perimeter(const std::vector<Point>& ring) {
    double acc = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const Point& a = ring[i];
        const Point& b = ring[(i + 1) % ring.size()];
        acc += std::hypot(b.x - a.x, b.y - a.y);
    }
    return acc;
}

// PNPOLY crossing-parity test (W. R. Franklin)
inline bool point_in_polygon(double x, double y, const std::vector<Point>& ring) {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if (((ring[i].y > y) != (ring[j].y > y)) &&
            (x < (ring[j].x - ring[i].x) * (y - ring[i].y) / (ring[j].y - ring[i].y) +
                     ring[i].x)) {
            inside = !inside;
        }
    }
    return inside;
}

inline Mask raster(const Polygon& poly, int width, int height) {
    Mask m(height, width);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            if (point_in_polygon(c + 0.5, r + 0.5, poly.vertices())) m.at(r, c) = 1;
        }
    }
    return m;
}

// Sutherland-Hodgman; clip must be convex and counterclockwise
inline std::vector<Point> clip_convex(std::vector<Point> subject, const std::vector<Point>& clip) {
    for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
        const Point a = clip[i];
        const Point b = clip[(i + 1) % clip.size()];
        auto side = [&](const Point& p) {
            return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        };
        std::vector<Point> out;
        for (std::size_t j = 0; j < subject.size(); ++j) {
            const Point p = subject[j];
            const Point q = subject[(j + 1) % subject.size()];
            const double sp = side(p);
            const double sq = side(q);
            if (sp >= 0.0) out.push_back(p);
            if ((sp >= 0.0) != (sq >= 0.0)) {
                const double t = sp / (sp - sq);
                out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
            }
        }
        subject = std::move(out);
    }
    return subject;
}

inline double convex_intersection_area(const Polygon& a, const Polygon& b) {
    const std::vector<Point> inter = clip_convex(a.vertices(), b.vertices());
    return inter.size() < 3 ? 0.0 : std::abs(oracle::signed_area(inter));
}

// minimum-area bounding rectangle by sweeping every pairwise direction; the
// optimum is edge-aligned, and hull edges are a subset of the pairs
inline double min_rect_area(const std::vector<Point>& pts) {
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double dx = pts[j].x - pts[i].x;
            const double dy = pts[j].y - pts[i].y;
            const double len = std::hypot(dx, dy);
            if (len < 1e-12) continue;
            any = true;
            const double ux = dx / len;
            const double uy = dy / len;
            double lo_u = std::numeric_limits<double>::infinity();
            double hi_u = -lo_u;
            double lo_v = lo_u;
            double hi_v = -lo_u;
            for (const Point& p : pts) {
                const double u = p.x * ux + p.y * uy;
                const double v = -p.x * uy + p.y * ux;
                lo_u = std::min(lo_u, u);
                hi_u = std::max(hi_u, u);
                lo_v = std::min(lo_v, v);
                hi_v = std::max(hi_v, v);
            }
            best = std::min(best, (hi_u - lo_u) * (hi_v - lo_v));
        }
    }
    return any ? best : 0.0;
}

// flood-fill connected components, labels in row-major first-encounter order
inline LabelMap ccl(const Mask& mask, int connectivity) {
    LabelMap out(mask.height, mask.width);
    int next = 0;
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (!mask.at(r, c) || out.at(r, c) != 0) continue;
            const int label = ++next;
            std::deque<std::pair<int, int>> queue{{r, c}};
            out.at(r, c) = label;
            while (!queue.empty()) {
                const auto [cr, cc] = queue.front();
                queue.pop_front();
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        if (connectivity == 4 && dr != 0 && dc != 0) continue;
                        const int nr = cr + dr;
                        const int nc = cc + dc;
                        if (nr < 0 || nr >= mask.height || nc < 0 || nc >= mask.width) continue;
                        if (!mask.at(nr, nc) || out.at(nr, nc) != 0) continue;
                        out.at(nr, nc) = label;
                        queue.push_back({nr, nc});
                    }
                }
            }
        }
    }
    return out;
}

// fill enclosed holes by flooding the background from the canvas border;
// bg_connectivity 4 pairs with 8-connected foreground and vice versa
inline Mask fill_holes(const Mask& component, int bg_connectivity = 4) {
    Mask reached(component.height, component.width);
    std::deque<std::pair<int, int>> queue;
    auto push = [&](int r, int c) {
        if (r < 0 || r >= component.height || c < 0 || c >= component.width) return;
        if (component.at(r, c) || reached.at(r, c)) return;
        reached.at(r, c) = 1;
        queue.push_back({r, c});
    };
    for (int r = 0; r < component.height; ++r) {
        push(r, 0);
        push(r, component.width - 1);
    }
    for (int c = 0; c < component.width; ++c) {
        push(0, c);
        push(component.height - 1, c);
    }
    while (!queue.empty()) {
        const auto [r, c] = queue.front();
        queue.pop_front();
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                if (bg_connectivity == 4 && dr != 0 && dc != 0) continue;
                push(r + dr, c + dc);
            }
        }
    }
    Mask filled(component.height, component.width);
    for (std::size_t i = 0; i < filled.data.size(); ++i) {
        filled.data[i] = reached.data[i] ? 0 : 1;
    }
    return filled;
}

inline double box_iou(const Box& a, const Box& b) {
    const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    const double inter = w * h;
    const double uni = (a.x_max - a.x_min) * (a.y_max - a.y_min) +
                       (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter;
    return uni <= 0.0 ? 0.0 : inter / uni;
}

// repeated-max reference NMS
inline std::vector<Box> nms(std::vector<Box> boxes, double thr) {
    std::vector<Box> kept;
    std::vector<char> alive(boxes.size(), 1);
    for (;;) {
        int best = -1;
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            if (alive[i] && (best < 0 || *boxes[i].score > *boxes[best].score)) {
                best = static_cast<int>(i);
            }
        }
        if (best < 0) break;
        kept.push_back(boxes[best]);
        alive[best] = 0;
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            if (alive[i] && oracle::box_iou(boxes[best], boxes[i]) > thr) alive[i] = 0;
        }
    }
    return kept;
}

// brute-force anchor target assignment straight from the rule list
struct RpnRef {
    std::vector<int> labels;   // 1 positive, 0 negative, -1 ignored
    std::vector<int> matched;  // gt index for positives, else -1
};

inline RpnRef assign_rpn(const std::vector<Box>& anchors, const std::vector<Box>& gts,
                         int image_w, int image_h, double pos_thr, double neg_thr) {
    const std::size_t n = anchors.size();
    RpnRef ref;
    ref.labels.assign(n, -1);
    ref.matched.assign(n, -1);

    std::vector<char> eligible(n, 1);
    for (std::size_t a = 0; a < n; ++a) {
        const Box& box = anchors[a];
        if (box.x_min < 0.0 || box.y_min < 0.0 || box.x_max > image_w || box.y_max > image_h) {
            eligible[a] = 0;
            continue;
        }
        for (const Box& g : gts) {
            if (g.ignore && oracle::box_iou(box, g) >= neg_thr) eligible[a] = 0;
        }
    }

    for (std::size_t a = 0; a < n; ++a) {
        if (!eligible[a]) continue;
        double best = 0.0;
        int arg = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gts[g].ignore) continue;
            const double iou = oracle::box_iou(anchors[a], gts[g]);
            if (iou > best) {
                best = iou;
                arg = static_cast<int>(g);
            }
        }
        if (best >= pos_thr) {
            ref.labels[a] = 1;
            ref.matched[a] = arg;
        } else if (best < neg_thr) {
            ref.labels[a] = 0;
        }
    }

    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].ignore) continue;
        double best = 0.0;
        int arg = -1;
        for (std::size_t a = 0; a < n; ++a) {
            if (!eligible[a]) continue;
            const double iou = oracle::box_iou(anchors[a], gts[g]);
            if (iou > best) {
                best = iou;
                arg = static_cast<int>(a);
            }
        }
        if (arg >= 0) {
            ref.labels[arg] = 1;
            ref.matched[arg] = static_cast<int>(g);
        }
    }
    return ref;
}

// area of a rectangle offset outward by d with circular corners
inline double rounded_rect_area(double w, double h, double d) {
    return w * h + 2.0 * d * (w + h) + kPi * d * d;
}

// plain exp-normalize in long double, no max shift
inline std::vector<double> softmax_ld(const std::vector<double>& logits) {
    long double sum = 0.0L;
    std::vector<long double> e(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        e[i] = expl(static_cast<long double>(logits[i]));
        sum += e[i];
    }
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = static_cast<double>(e[i] / sum);
    }
    return out;
}

}  // namespace oracle
