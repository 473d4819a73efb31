#include "textkernel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

#include "textkernel/errors.hpp"

namespace textkernel {
namespace {

constexpr double kPi = 3.14159265358979323846;

double norm(Point p) { return std::hypot(p.x, p.y); }

Point normalized(Point p) {
    double n = norm(p);
    return {p.x / n, p.y / n};
}

Point rotated(Point p, double ang) {
    double c = std::cos(ang);
    double s = std::sin(ang);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

bool near_point(Point a, Point b, double tol) {
    return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol;
}

double coord_scale(const std::vector<Point>& ring) {
    double s = 0.0;
    for (const Point& p : ring) {
        s = std::max({s, std::abs(p.x), std::abs(p.y)});
    }
    return s;
}

// Sunday winding number; probe points are always jittered off the ring so the
// half-open tie rules never matter in practice.
int winding_number(const std::vector<Point>& ring, Point q) {
    int w = 0;
    const std::size_t m = ring.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Point& p1 = ring[i];
        const Point& p2 = ring[(i + 1) % m];
        if (p1.y <= q.y) {
            if (p2.y > q.y && cross(p2 - p1, q - p1) > 0.0) ++w;
        } else {
            if (p2.y <= q.y && cross(p2 - p1, q - p1) < 0.0) --w;
        }
    }
    return w;
}

// Node interning with tolerance snapping, hashed on a coarse grid.
class NodeIndex {
public:
    explicit NodeIndex(double tol) : tol_(tol) {}

    int intern(Point p) {
        const long long gx = static_cast<long long>(std::floor(p.x / (4.0 * tol_)));
        const long long gy = static_cast<long long>(std::floor(p.y / (4.0 * tol_)));
        for (long long dx = -1; dx <= 1; ++dx) {
            for (long long dy = -1; dy <= 1; ++dy) {
                auto it = buckets_.find(key(gx + dx, gy + dy));
                if (it == buckets_.end()) continue;
                for (int id : it->second) {
                    if (near_point(nodes_[id], p, tol_)) return id;
                }
            }
        }
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(p);
        buckets_[key(gx, gy)].push_back(id);
        return id;
    }

    Point at(int id) const { return nodes_[id]; }

private:
    static std::uint64_t key(long long gx, long long gy) {
        return static_cast<std::uint64_t>(gx) * 73856093ull ^ static_cast<std::uint64_t>(gy) * 19349663ull;
    }

    double tol_;
    std::vector<Point> nodes_;
    std::unordered_map<std::uint64_t, std::vector<int>> buckets_;
};

struct SubEdge {
    int from = -1;
    int to = -1;
    Point a;
    Point b;
    bool keep = false;
    bool used = false;
};

// Resolves a possibly self-intersecting offset ring into the boundary loops
// of its positive-winding region.
std::vector<std::vector<Point>> resolve_positive_region(const std::vector<Point>& ring) {
    const std::size_t m = ring.size();
    const double scale = coord_scale(ring);
    const double tol = 1e-9 * (1.0 + scale);
    const double min_area = 1e-9 * (1.0 + scale * scale);

    // Split parameters per ring edge at every crossing or touch with a
    // non-adjacent edge. Collinear overlaps (common after offsetting
    // rectilinear contours) are split at each other's endpoints.
    std::vector<std::vector<double>> cuts(m);
    bool any_cut = false;
    for (std::size_t i = 0; i < m; ++i) {
        const Point pi = ring[i];
        const Point r = ring[(i + 1) % m] - pi;
        const double rlen = norm(r);
        for (std::size_t j = i + 1; j < m; ++j) {
            if (j == i + 1 || (i == 0 && j == m - 1)) continue;
            const Point pj = ring[j];
            const Point s = ring[(j + 1) % m] - pj;
            const double slen = norm(s);
            const double denom = cross(r, s);
            auto add_cut = [&](std::size_t e, double t, double len) {
                const double t_tol = tol / std::max(len, tol);
                if (t > t_tol && t < 1.0 - t_tol) {
                    cuts[e].push_back(t);
                    any_cut = true;
                }
            };
            if (std::abs(denom) > 1e-12 * (rlen * slen + 1.0)) {
                const double t = cross(pj - pi, s) / denom;
                const double u = cross(pj - pi, r) / denom;
                if (t >= -1e-12 && t <= 1.0 + 1e-12 && u >= -1e-12 && u <= 1.0 + 1e-12) {
                    add_cut(i, t, rlen);
                    add_cut(j, u, slen);
                }
            } else if (std::abs(cross(pj - pi, r)) <= tol * std::max(rlen, 1.0)) {
                // parallel and on the same line: project endpoints across
                const double rr = dot(r, r);
                const double ss = dot(s, s);
                if (rr > 0.0) {
                    add_cut(i, dot(pj - pi, r) / rr, rlen);
                    add_cut(i, dot(pj + s - pi, r) / rr, rlen);
                }
                if (ss > 0.0) {
                    add_cut(j, dot(pi - pj, s) / ss, slen);
                    add_cut(j, dot(pi + r - pj, s) / ss, slen);
                }
            }
        }
    }

    if (!any_cut) {
        if (signed_area(ring) > min_area) return {ring};
        return {};
    }

    NodeIndex nodes(tol);
    std::vector<SubEdge> edges;
    for (std::size_t i = 0; i < m; ++i) {
        std::sort(cuts[i].begin(), cuts[i].end());
        const Point pi = ring[i];
        const Point r = ring[(i + 1) % m] - pi;
        Point prev = pi;
        auto emit = [&](Point q) {
            const int from = nodes.intern(prev);
            const int to = nodes.intern(q);
            if (from != to) edges.push_back({from, to, nodes.at(from), nodes.at(to), false, false});
            prev = q;
        };
        for (double t : cuts[i]) emit(pi + r * t);
        emit(ring[(i + 1) % m]);
    }

    // An edge lies on the union boundary when the positive-winding region is
    // on its left and not on its right.
    const double delta = 1e-6 * (1.0 + scale);
    for (SubEdge& e : edges) {
        const Point mid = (e.a + e.b) * 0.5;
        const Point dir = normalized(e.b - e.a);
        const Point left{-dir.y, dir.x};
        const int wl = winding_number(ring, mid + left * delta);
        const int wr = winding_number(ring, mid - left * delta);
        e.keep = wl >= 1 && wr <= 0;
    }

    // Coincident duplicates (overlapping collinear offset edges) would break
    // the traversal; keep one representative per directed node pair.
    std::map<std::pair<int, int>, int> seen;
    for (SubEdge& e : edges) {
        if (!e.keep) continue;
        auto [it, fresh] = seen.emplace(std::make_pair(e.from, e.to), 1);
        if (!fresh) e.keep = false;
    }

    // Crossing clusters at tucked corners can leave kept stubs with no
    // continuation; no closed loop can pass through them, so trim until every
    // kept edge has a kept predecessor and successor.
    for (bool changed = true; changed;) {
        changed = false;
        std::map<int, int> out_deg;
        std::map<int, int> in_deg;
        for (const SubEdge& e : edges) {
            if (!e.keep) continue;
            ++out_deg[e.from];
            ++in_deg[e.to];
        }
        for (SubEdge& e : edges) {
            if (!e.keep) continue;
            if (out_deg.find(e.to) == out_deg.end() || in_deg.find(e.from) == in_deg.end()) {
                e.keep = false;
                changed = true;
            }
        }
    }

    std::unordered_map<int, std::vector<std::size_t>> out;
    for (std::size_t id = 0; id < edges.size(); ++id) {
        if (edges[id].keep) out[edges[id].from].push_back(id);
    }

    std::vector<std::vector<Point>> loops;
    for (std::size_t start = 0; start < edges.size(); ++start) {
        if (!edges[start].keep || edges[start].used) continue;
        std::vector<Point> loop;
        std::vector<std::size_t> path;
        std::size_t cur = start;
        bool closed = false;
        for (std::size_t guard = 0; guard <= edges.size(); ++guard) {
            SubEdge& e = edges[cur];
            e.used = true;
            path.push_back(cur);
            loop.push_back(e.a);
            if (e.to == edges[start].from) {
                closed = true;
                break;
            }
            const Point din = normalized(e.b - e.a);
            std::size_t best = edges.size();
            double best_ang = -1e9;
            auto it = out.find(e.to);
            if (it != out.end()) {
                for (std::size_t cand : it->second) {
                    if (edges[cand].used) continue;
                    const Point dout = normalized(edges[cand].b - edges[cand].a);
                    const double ang = std::atan2(cross(din, dout), dot(din, dout));
                    if (ang > best_ang) {
                        best_ang = ang;
                        best = cand;
                    }
                }
            }
            if (best == edges.size()) {
                // numeric gap: hop to the nearest unused boundary edge start
                double best_d = 4.0 * delta;
                for (std::size_t cand = 0; cand < edges.size(); ++cand) {
                    if (!edges[cand].keep || edges[cand].used) continue;
                    const double dd = norm(edges[cand].a - e.b);
                    if (dd < best_d) {
                        best_d = dd;
                        best = cand;
                    }
                }
            }
            if (best == edges.size()) break;
            cur = best;
        }
        if (closed && loop.size() >= 3) {
            loops.push_back(std::move(loop));
        } else {
            // a failed walk must not consume edges other loops still need
            for (std::size_t id : path) edges[id].used = false;
        }
    }

    std::vector<std::vector<Point>> result;
    for (auto& loop : loops) {
        std::vector<Point> clean;
        for (const Point& q : loop) {
            if (clean.empty() || !near_point(clean.back(), q, tol)) clean.push_back(q);
        }
        while (clean.size() > 1 && near_point(clean.front(), clean.back(), tol)) clean.pop_back();
        if (clean.size() < 3) continue;
        if (signed_area(clean) <= min_area) continue;  // holes and slivers
        result.push_back(std::move(clean));
    }
    return result;
}

}  // namespace

Polygon::Polygon(std::vector<Point> vertices) {
    if (vertices.size() < 3) {
        throw InvalidGeometryError("polygon needs at least 3 vertices");
    }
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (near_point(vertices[i], vertices[(i + 1) % n], 1e-9)) {
            throw InvalidGeometryError("polygon has consecutive duplicate vertices");
        }
    }
    if (signed_area(vertices) < 0.0) {
        std::reverse(vertices.begin(), vertices.end());
    }
    vertices_ = std::move(vertices);
}

Polygon Polygon::unchecked(std::vector<Point> vertices) {
    Polygon p;
    p.vertices_ = std::move(vertices);
    return p;
}

double signed_area(const std::vector<Point>& ring) {
    double acc = 0.0;
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = ring[i];
        const Point& b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    return 0.5 * acc;
}

double polygon_area(const Polygon& p) { return std::abs(signed_area(p.vertices())); }

double polygon_perimeter(const Polygon& p) {
    double acc = 0.0;
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
        acc += norm(p[(i + 1) % n] - p[i]);
    }
    return acc;
}

Point polygon_centroid(const Polygon& p) {
    const std::vector<Point>& v = p.vertices();
    const std::size_t n = v.size();
    const double a = signed_area(v);
    if (std::abs(a) < 1e-12) {
        Point mean{0.0, 0.0};
        for (const Point& q : v) mean = mean + q;
        return mean * (1.0 / static_cast<double>(n));
    }
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p1 = v[i];
        const Point& p2 = v[(i + 1) % n];
        const double w = p1.x * p2.y - p2.x * p1.y;
        cx += (p1.x + p2.x) * w;
        cy += (p1.y + p2.y) * w;
    }
    return {cx / (6.0 * a), cy / (6.0 * a)};
}

std::vector<Polygon> offset_polygon(const Polygon& p, double d) {
    if (d == 0.0) return {p};
    const std::vector<Point>& v = p.vertices();
    const std::size_t n = v.size();
    const double dedupe_tol = 1e-12 * (1.0 + coord_scale(v) + std::abs(d));

    std::vector<Point> raw;
    raw.reserve(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
        const Point prev = v[(i + n - 1) % n];
        const Point cur = v[i];
        const Point next = v[(i + 1) % n];
        const Point u1 = normalized(cur - prev);
        const Point u2 = normalized(next - cur);
        const Point n1{u1.y, -u1.x};  // outward normal of a positive-area ring
        const Point n2{u2.y, -u2.x};
        const Point a = cur + n1 * d;
        const Point b = cur + n2 * d;
        const double turn = cross(u1, u2);
        const double cosang = dot(u1, u2);

        if (std::abs(turn) < 1e-12 && cosang > 0.0) {
            raw.push_back(a);  // straight through, b coincides
            continue;
        }
        const bool diverging = d > 0.0 ? turn > 0.0 : turn < 0.0;
        if (!diverging) {
            // converging corner: tuck through the source vertex, the winding
            // pass removes the inverted wedge
            raw.push_back(a);
            raw.push_back(cur);
            raw.push_back(b);
            continue;
        }
        if (d > 0.0) {
            // round join, at most 15 degrees per arc segment
            const double sweep = std::atan2(turn, cosang);
            const int steps = std::max(1, static_cast<int>(std::ceil(sweep / (kPi / 12.0))));
            raw.push_back(a);
            for (int k = 1; k < steps; ++k) {
                raw.push_back(cur + rotated(n1, sweep * k / steps) * d);
            }
            raw.push_back(b);
        } else {
            // miter join with limit 2; square off beyond the limit
            const double denom = 1.0 + dot(n1, n2);
            if (dot(n1, n2) < -0.5 || denom < 1e-12) {
                raw.push_back(a);
                raw.push_back(b);
            } else {
                raw.push_back(cur + (n1 + n2) * (d / denom));
            }
        }
    }

    std::vector<Point> ring;
    for (const Point& q : raw) {
        if (ring.empty() || !near_point(ring.back(), q, dedupe_tol)) ring.push_back(q);
    }
    while (ring.size() > 1 && near_point(ring.front(), ring.back(), dedupe_tol)) ring.pop_back();
    if (ring.size() < 3) return {};

    std::vector<Polygon> pieces;
    for (auto& loop : resolve_positive_region(ring)) {
        pieces.push_back(Polygon::unchecked(std::move(loop)));
    }
    return pieces;
}

Box bounding_box(const Polygon& p) {
    Box b;
    b.x_min = b.y_min = std::numeric_limits<double>::infinity();
    b.x_max = b.y_max = -std::numeric_limits<double>::infinity();
    for (const Point& q : p.vertices()) {
        b.x_min = std::min(b.x_min, q.x);
        b.y_min = std::min(b.y_min, q.y);
        b.x_max = std::max(b.x_max, q.x);
        b.y_max = std::max(b.y_max, q.y);
    }
    return b;
}

Polygon min_area_rect(const Polygon& p) {
    std::vector<Point> pts = p.vertices();
    std::sort(pts.begin(), pts.end(), [](Point a, Point b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](Point a, Point b) { return a.x == b.x && a.y == b.y; }),
              pts.end());

    // monotone chain, strict turns only (collinear points dropped)
    std::vector<Point> hull;
    auto build = [&](auto begin, auto end) {
        const std::size_t base = hull.size();
        for (auto it = begin; it != end; ++it) {
            while (hull.size() >= base + 2 &&
                   cross(hull.back() - hull[hull.size() - 2], *it - hull.back()) <= 0.0) {
                hull.pop_back();
            }
            hull.push_back(*it);
        }
        hull.pop_back();
    };
    if (pts.size() >= 3) {
        build(pts.begin(), pts.end());
        build(pts.rbegin(), pts.rend());
    } else {
        hull = pts;
    }

    if (hull.size() < 3) {
        // collinear input: zero-width rectangle along the segment
        const Point a = pts.front();
        const Point b = pts.back();
        return Polygon::unchecked({a, b, b, a});
    }

    const std::size_t h = hull.size();
    double best_area = std::numeric_limits<double>::infinity();
    Point best_u{1.0, 0.0};
    double bu0 = 0.0, bu1 = 0.0, bv0 = 0.0, bv1 = 0.0;
    for (std::size_t i = 0; i < h; ++i) {
        const Point u = normalized(hull[(i + 1) % h] - hull[i]);
        const Point w{-u.y, u.x};
        double u0 = std::numeric_limits<double>::infinity(), u1 = -u0;
        double v0 = u0, v1 = -u0;
        for (const Point& q : hull) {
            const double su = dot(q, u);
            const double sv = dot(q, w);
            u0 = std::min(u0, su);
            u1 = std::max(u1, su);
            v0 = std::min(v0, sv);
            v1 = std::max(v1, sv);
        }
        const double area = (u1 - u0) * (v1 - v0);
        if (area < best_area) {
            best_area = area;
            best_u = u;
            bu0 = u0;
            bu1 = u1;
            bv0 = v0;
            bv1 = v1;
        }
    }
    const Point u = best_u;
    const Point w{-u.y, u.x};
    auto corner = [&](double su, double sv) { return u * su + w * sv; };
    return Polygon::unchecked(
        {corner(bu0, bv0), corner(bu1, bv0), corner(bu1, bv1), corner(bu0, bv1)});
}

Mask rasterize_fill(const Polygon& p, int width, int height) {
    Mask mask(height, width);
    const std::vector<Point>& v = p.vertices();
    const std::size_t n = v.size();
    if (n < 3) return mask;

    Box bb = bounding_box(p);
    const int row_begin = std::max(0, static_cast<int>(std::floor(bb.y_min - 0.5)));
    const int row_end = std::min(height, static_cast<int>(std::ceil(bb.y_max)));

    std::vector<double> xs;
    for (int row = row_begin; row < row_end; ++row) {
        const double y = row + 0.5;
        xs.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& p1 = v[i];
            const Point& p2 = v[(i + 1) % n];
            if ((p1.y <= y) != (p2.y <= y)) {
                xs.push_back(p1.x + (y - p1.y) / (p2.y - p1.y) * (p2.x - p1.x));
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            // pixel centers in [x0, x1): left edge in, right edge out
            int c0 = static_cast<int>(std::ceil(xs[k] - 0.5));
            int c1 = static_cast<int>(std::ceil(xs[k + 1] - 0.5));
            c0 = std::max(c0, 0);
            c1 = std::min(c1, width);
            for (int col = c0; col < c1; ++col) mask.at(row, col) = 1;
        }
    }
    return mask;
}

double box_iou(const Box& a, const Box& b) {
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

PolygonOverlap polygon_overlap(const Polygon& a, const Polygon& b, int resolution) {
    resolution = std::max(1, resolution);
    const Box ba = bounding_box(a);
    const Box bb = bounding_box(b);
    const double x0 = std::floor(std::min(ba.x_min, bb.x_min));
    const double y0 = std::floor(std::min(ba.y_min, bb.y_min));
    const double x1 = std::ceil(std::max(ba.x_max, bb.x_max));
    const double y1 = std::ceil(std::max(ba.y_max, bb.y_max));
    const int w = std::max(0, static_cast<int>(x1 - x0)) * resolution;
    const int h = std::max(0, static_cast<int>(y1 - y0)) * resolution;

    auto shifted = [&](const Polygon& p) {
        std::vector<Point> v = p.vertices();
        for (Point& q : v) {
            q.x = (q.x - x0) * resolution;
            q.y = (q.y - y0) * resolution;
        }
        return Polygon::unchecked(std::move(v));
    };
    const Mask ma = rasterize_fill(shifted(a), w, h);
    const Mask mb = rasterize_fill(shifted(b), w, h);

    PolygonOverlap ov;
    for (std::size_t i = 0; i < ma.data.size(); ++i) {
        const bool ia = ma.data[i] != 0;
        const bool ib = mb.data[i] != 0;
        ov.area_a += ia;
        ov.area_b += ib;
        ov.intersection += ia && ib;
        ov.union_ += ia || ib;
    }
    return ov;
}

double polygon_iou(const Polygon& a, const Polygon& b, int resolution) {
    const PolygonOverlap ov = polygon_overlap(a, b, resolution);
    if (ov.union_ == 0) return 0.0;
    return static_cast<double>(ov.intersection) / static_cast<double>(ov.union_);
}

}  // namespace textkernel
