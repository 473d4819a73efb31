#include "textkernel/postprocess.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "textkernel/errors.hpp"

namespace textkernel {
namespace {

std::int32_t find_root(std::vector<std::int32_t>& parent, std::int32_t x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

// Crack following along pixel corners, component kept on the right of the
// walk, 8-connected foreground. Produces lattice vertices, one per turn, so
// the ring is already free of collinear runs.
Polygon trace_from(const LabelMap& labels, int component_id, int row0, int col0) {
    const auto fg = [&](int row, int col) {
        return labels.in_bounds(row, col) && labels.at(row, col) == component_id;
    };
    struct V {
        int x, y;
    };
    const V start{col0, row0};
    const V dstart{1, 0};

    std::vector<Point> ring;
    ring.push_back({static_cast<double>(start.x), static_cast<double>(start.y)});
    V p = start;
    V d = dstart;
    const std::size_t guard =
        4 * static_cast<std::size_t>(labels.height + 1) * (labels.width + 1) + 8;
    for (std::size_t step = 0; step < guard; ++step) {
        const V q{p.x + d.x, p.y + d.y};
        const V left{d.y, -d.x};  // left-of-travel in image coords
        auto quadrant = [&](V s) {  // pixel at corner q toward s (s in {-1,1}^2)
            return fg(s.y < 0 ? q.y - 1 : q.y, s.x < 0 ? q.x - 1 : q.x);
        };
        const bool ahead_left = quadrant({d.x + left.x, d.y + left.y});
        const bool ahead_right = quadrant({d.x - left.x, d.y - left.y});
        V d2;
        if (ahead_left) {  // includes the 8-connected saddle: hug left
            d2 = left;
        } else if (ahead_right) {
            d2 = d;
        } else {
            d2 = {-left.x, -left.y};
        }
        if (q.x == start.x && q.y == start.y && d2.x == dstart.x && d2.y == dstart.y) {
            break;  // closed
        }
        if (d2.x != d.x || d2.y != d.y) {
            ring.push_back({static_cast<double>(q.x), static_cast<double>(q.y)});
        }
        p = q;
        d = d2;
    }

    if (signed_area(ring) < 0.0) std::reverse(ring.begin(), ring.end());
    return Polygon::unchecked(std::move(ring));
}

}  // namespace

Mask binarize(const ScoreMap& prob, double threshold) {
    Mask out(prob.height, prob.width);
    for (std::size_t i = 0; i < prob.data.size(); ++i) {
        out.data[i] = prob.data[i] > threshold ? 1 : 0;
    }
    return out;
}

Components connected_components(const Mask& bin, int connectivity) {
    if (connectivity != 4 && connectivity != 8) {
        throw std::invalid_argument("connected_components: connectivity must be 4 or 8");
    }
    const int h = bin.height;
    const int w = bin.width;
    Components out;
    out.labels = LabelMap(h, w);
    if (h == 0 || w == 0) return out;

    std::vector<std::int32_t> parent(1, 0);  // provisional labels, 1-based
    LabelMap prov(h, w);
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            if (!bin.at(row, col)) continue;
            std::int32_t neigh[4];
            int nn = 0;
            if (col > 0 && prov.at(row, col - 1)) neigh[nn++] = prov.at(row, col - 1);
            if (row > 0) {
                if (prov.at(row - 1, col)) neigh[nn++] = prov.at(row - 1, col);
                if (connectivity == 8) {
                    if (col > 0 && prov.at(row - 1, col - 1)) neigh[nn++] = prov.at(row - 1, col - 1);
                    if (col + 1 < w && prov.at(row - 1, col + 1)) neigh[nn++] = prov.at(row - 1, col + 1);
                }
            }
            if (nn == 0) {
                const std::int32_t fresh = static_cast<std::int32_t>(parent.size());
                parent.push_back(fresh);
                prov.at(row, col) = fresh;
                continue;
            }
            std::int32_t root = find_root(parent, neigh[0]);
            for (int k = 1; k < nn; ++k) {
                root = std::min(root, find_root(parent, neigh[k]));
            }
            prov.at(row, col) = root;
            for (int k = 0; k < nn; ++k) {
                parent[find_root(parent, neigh[k])] = root;
            }
        }
    }

    // canonical ids in first-encounter row-major order
    std::vector<std::int32_t> canonical(parent.size(), 0);
    std::int32_t next_id = 0;
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            const std::int32_t pv = prov.at(row, col);
            if (!pv) continue;
            const std::int32_t root = find_root(parent, pv);
            if (!canonical[root]) canonical[root] = ++next_id;
            out.labels.at(row, col) = canonical[root];
        }
    }
    out.count = next_id;
    return out;
}

Polygon trace_contour(const LabelMap& labels, int component_id) {
    if (component_id <= 0) {
        throw NotFoundError("trace_contour: background id " + std::to_string(component_id) +
                            " is not a component");
    }
    for (int row = 0; row < labels.height; ++row) {
        for (int col = 0; col < labels.width; ++col) {
            if (labels.at(row, col) == component_id) {
                return trace_from(labels, component_id, row, col);
            }
        }
    }
    throw NotFoundError("trace_contour: no pixels with component id " +
                        std::to_string(component_id));
}

Polygon unclip(const Polygon& kernel_poly, double r_prime) {
    if (r_prime < 0.0) throw InvalidGeometryError("unclip: negative ratio");
    if (r_prime == 0.0) return kernel_poly;
    const double perimeter = polygon_perimeter(kernel_poly);
    if (perimeter <= 0.0) throw InvalidGeometryError("unclip: zero-perimeter polygon");
    const double d = polygon_area(kernel_poly) * r_prime / perimeter;
    std::vector<Polygon> pieces = offset_polygon(kernel_poly, d);
    if (pieces.empty()) return kernel_poly;  // degenerate source ring
    std::size_t best = 0;
    for (std::size_t i = 1; i < pieces.size(); ++i) {
        if (polygon_area(pieces[i]) > polygon_area(pieces[best])) best = i;
    }
    return pieces[best];
}

double score_component(const ScoreMap& prob, const LabelMap& labels, int component_id) {
    if (prob.height != labels.height || prob.width != labels.width) {
        throw std::invalid_argument("score_component: shape mismatch");
    }
    double sum = 0.0;
    std::int64_t count = 0;
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
        if (labels.data[i] == component_id) {
            sum += prob.data[i];
            ++count;
        }
    }
    if (count == 0) {
        throw NotFoundError("score_component: no pixels with component id " +
                            std::to_string(component_id));
    }
    return sum / static_cast<double>(count);
}

DetectionResult detect(const ProbMap& prob, const DetectConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();

    int kernel_ch;
    if (prob.channels == 1) {
        kernel_ch = 0;
    } else if (prob.channels == 3) {
        kernel_ch = 1;
    } else {
        throw DataFormatError("detect: expected 1 or 3 channels, got " +
                              std::to_string(prob.channels));
    }
    ScoreMap kernel(prob.height, prob.width);
    for (int row = 0; row < prob.height; ++row) {
        for (int col = 0; col < prob.width; ++col) {
            kernel.at(row, col) = prob.at(row, col, kernel_ch);
        }
    }

    const Mask bin = binarize(kernel, cfg.bin_thr);
    const Components comps = connected_components(bin, cfg.connectivity);

    // per-component pixel count, probability sum, and first pixel in one pass
    std::vector<std::int64_t> count(comps.count + 1, 0);
    std::vector<double> sum(comps.count + 1, 0.0);
    std::vector<int> first_row(comps.count + 1, -1);
    std::vector<int> first_col(comps.count + 1, -1);
    for (int row = 0; row < comps.labels.height; ++row) {
        for (int col = 0; col < comps.labels.width; ++col) {
            const std::int32_t id = comps.labels.at(row, col);
            if (!id) continue;
            ++count[id];
            sum[id] += kernel.at(row, col);
            if (first_row[id] < 0) {
                first_row[id] = row;
                first_col[id] = col;
            }
        }
    }

    DetectionResult res;
    res.component_count = comps.count;
    for (int id = 1; id <= comps.count; ++id) {
        if (count[id] < cfg.min_area_px) continue;
        const double score = sum[id] / static_cast<double>(count[id]);
        if (score < cfg.box_score_thr) continue;
        Polygon poly = trace_from(comps.labels, id, first_row[id], first_col[id]);
        Polygon dilated = unclip(poly, cfg.r_prime);
        if (cfg.output_mode == OutputMode::kMinAreaRect) {
            dilated = min_area_rect(dilated);
        }
        res.polygons.push_back(std::move(dilated));
        res.scores.push_back(score);
    }
    res.kept_count = static_cast<int>(res.polygons.size());

    const auto t1 = std::chrono::steady_clock::now();
    res.elapsed_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return res;
}

}  // namespace textkernel
