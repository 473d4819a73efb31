#include "textkernel/tdm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "textkernel/errors.hpp"
#include "textkernel/rng.hpp"

namespace textkernel {
namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

bool anchor_in_bounds(const Box& a, int image_w, int image_h) {
    return a.x_min >= 0.0 && a.y_min >= 0.0 && a.x_max <= image_w && a.y_max <= image_h;
}

// descending score, ties to the lower index
std::vector<std::size_t> score_order(const std::vector<Box>& boxes) {
    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return *boxes[a].score > *boxes[b].score;
    });
    return order;
}

}  // namespace

std::vector<Box> build_anchors(const AnchorSpec& spec, int image_w, int image_h) {
    require(image_w > 0 && image_h > 0, "build_anchors: image dims must be positive");
    std::vector<Box> anchors;
    for (int stride : spec.strides) {
        const int ny = (image_h + stride - 1) / stride;
        const int nx = (image_w + stride - 1) / stride;
        const double size = spec.base_scale * stride;
        for (int i = 0; i < ny; ++i) {
            for (int j = 0; j < nx; ++j) {
                const double cx = (j + 0.5) * stride;
                const double cy = (i + 0.5) * stride;
                for (double rho : spec.aspect_ratios) {
                    const double w = size * std::sqrt(rho);
                    const double h = size / std::sqrt(rho);
                    Box b;
                    b.x_min = cx - 0.5 * w;
                    b.y_min = cy - 0.5 * h;
                    b.x_max = cx + 0.5 * w;
                    b.y_max = cy + 0.5 * h;
                    anchors.push_back(b);
                }
            }
        }
    }
    return anchors;
}

std::vector<int> anchor_levels(const AnchorSpec& spec, int image_w, int image_h) {
    std::vector<int> levels;
    for (std::size_t l = 0; l < spec.strides.size(); ++l) {
        const int stride = spec.strides[l];
        const std::size_t n = static_cast<std::size_t>((image_h + stride - 1) / stride) *
                              ((image_w + stride - 1) / stride) * spec.aspect_ratios.size();
        levels.insert(levels.end(), n, static_cast<int>(l));
    }
    return levels;
}

BoxDelta encode_box(const Box& anchor, const Box& gt) {
    const double aw = anchor.width();
    const double ah = anchor.height();
    if (aw <= 0.0 || ah <= 0.0) throw DegenerateBoxError("encode_box: degenerate anchor");
    const double gw = gt.width();
    const double gh = gt.height();
    if (gw <= 0.0 || gh <= 0.0) throw DegenerateBoxError("encode_box: degenerate gt box");
    BoxDelta t;
    t.tx = (0.5 * (gt.x_min + gt.x_max) - 0.5 * (anchor.x_min + anchor.x_max)) / aw;
    t.ty = (0.5 * (gt.y_min + gt.y_max) - 0.5 * (anchor.y_min + anchor.y_max)) / ah;
    t.tw = std::log(gw / aw);
    t.th = std::log(gh / ah);
    return t;
}

Box decode_box(const Box& anchor, const BoxDelta& t) {
    const double aw = anchor.width();
    const double ah = anchor.height();
    if (aw <= 0.0 || ah <= 0.0) throw DegenerateBoxError("decode_box: degenerate anchor");
    const double cx = 0.5 * (anchor.x_min + anchor.x_max) + t.tx * aw;
    const double cy = 0.5 * (anchor.y_min + anchor.y_max) + t.ty * ah;
    const double w = aw * std::exp(t.tw);
    const double h = ah * std::exp(t.th);
    Box b;
    b.x_min = cx - 0.5 * w;
    b.y_min = cy - 0.5 * h;
    b.x_max = cx + 0.5 * w;
    b.y_max = cy + 0.5 * h;
    return b;
}

AssignmentResult assign_rpn(const std::vector<Box>& anchors, const std::vector<Box>& gts,
                            int image_w, int image_h, const RpnConfig& cfg) {
    const std::size_t n = anchors.size();
    AssignmentResult res;
    res.labels.assign(n, AnchorLabel::kIgnore);
    res.matched_gt.assign(n, -1);
    res.targets.assign(n, BoxDelta{});

    // out-of-bounds anchors and anchors overlapping an ignore gt are out of
    // the game entirely (neither positive, negative, nor best-match carrier)
    std::vector<char> eligible(n, 1);
    for (std::size_t a = 0; a < n; ++a) {
        if (!anchor_in_bounds(anchors[a], image_w, image_h)) {
            eligible[a] = 0;
            continue;
        }
        for (const Box& g : gts) {
            if (g.ignore && box_iou(anchors[a], g) >= cfg.neg_iou) {
                eligible[a] = 0;
                break;
            }
        }
    }

    std::vector<double> max_iou(n, 0.0);
    std::vector<int> argmax_gt(n, -1);
    std::vector<double> gt_best(gts.size(), 0.0);
    std::vector<int> gt_best_anchor(gts.size(), -1);
    for (std::size_t a = 0; a < n; ++a) {
        if (!eligible[a]) continue;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gts[g].ignore) continue;
            const double iou = box_iou(anchors[a], gts[g]);
            if (iou > max_iou[a]) {  // strict: ties keep the lowest gt index
                max_iou[a] = iou;
                argmax_gt[a] = static_cast<int>(g);
            }
            if (iou > gt_best[g]) {  // strict: ties keep the lowest anchor index
                gt_best[g] = iou;
                gt_best_anchor[g] = static_cast<int>(a);
            }
        }
    }

    for (std::size_t a = 0; a < n; ++a) {
        if (!eligible[a]) continue;
        if (max_iou[a] >= cfg.pos_iou) {
            res.labels[a] = AnchorLabel::kPositive;
            res.matched_gt[a] = argmax_gt[a];
        } else if (max_iou[a] < cfg.neg_iou) {
            res.labels[a] = AnchorLabel::kNegative;
        }
    }
    // best-match guarantee; ascending gt order, later gts win a shared anchor
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].ignore || gt_best_anchor[g] < 0 || gt_best[g] <= 0.0) continue;
        const int a = gt_best_anchor[g];
        res.labels[a] = AnchorLabel::kPositive;
        res.matched_gt[a] = static_cast<int>(g);
    }
    for (std::size_t a = 0; a < n; ++a) {
        if (res.labels[a] == AnchorLabel::kPositive) {
            res.targets[a] = encode_box(anchors[a], gts[res.matched_gt[a]]);
        }
    }
    return res;
}

std::vector<Box> nms(const std::vector<Box>& boxes, double iou_threshold) {
    for (const Box& b : boxes) {
        require(b.score.has_value(), "nms: all boxes need scores");
    }
    const std::vector<std::size_t> order = score_order(boxes);
    std::vector<char> suppressed(boxes.size(), 0);
    std::vector<Box> kept;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (suppressed[order[i]]) continue;
        const Box& keep = boxes[order[i]];
        kept.push_back(keep);
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            if (suppressed[order[j]]) continue;
            if (box_iou(keep, boxes[order[j]]) > iou_threshold) {
                suppressed[order[j]] = 1;
            }
        }
    }
    return kept;
}

std::vector<Box> select_proposals(const std::vector<Box>& anchors,
                                  const std::vector<BoxDelta>& deltas,
                                  const std::vector<double>& scores,
                                  const std::vector<int>& levels, int image_w, int image_h,
                                  const ProposalConfig& cfg) {
    require(anchors.size() == deltas.size() && anchors.size() == scores.size() &&
                anchors.size() == levels.size(),
            "select_proposals: input sizes disagree");

    struct Cand {
        Box box;
        std::size_t idx;
    };
    // decode, clip, size-filter, bucket by level
    int max_level = -1;
    for (int l : levels) max_level = std::max(max_level, l);
    std::vector<std::vector<Cand>> per_level(static_cast<std::size_t>(max_level + 1));
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        Box b = decode_box(anchors[i], deltas[i]);
        b.x_min = std::clamp(b.x_min, 0.0, static_cast<double>(image_w));
        b.x_max = std::clamp(b.x_max, 0.0, static_cast<double>(image_w));
        b.y_min = std::clamp(b.y_min, 0.0, static_cast<double>(image_h));
        b.y_max = std::clamp(b.y_max, 0.0, static_cast<double>(image_h));
        if (b.width() < cfg.min_size || b.height() < cfg.min_size) continue;
        b.score = scores[i];
        per_level[static_cast<std::size_t>(levels[i])].push_back({b, i});
    }

    std::vector<Box> pool;
    for (auto& cands : per_level) {
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            return *a.box.score > *b.box.score || (*a.box.score == *b.box.score && a.idx < b.idx);
        });
        if (static_cast<int>(cands.size()) > cfg.pre_nms_k) {
            cands.resize(static_cast<std::size_t>(cfg.pre_nms_k));
        }
        for (const Cand& c : cands) pool.push_back(c.box);
    }

    std::vector<Box> kept = nms(pool, cfg.nms_thr);
    if (static_cast<int>(kept.size()) > cfg.post_nms_k) {
        kept.resize(static_cast<std::size_t>(cfg.post_nms_k));
    }
    return kept;
}

std::vector<RoiSample> assign_rois(const std::vector<Box>& proposals, const std::vector<Box>& gts,
                                   std::uint64_t seed, const RoiConfig& cfg) {
    std::vector<int> fg_pool;
    std::vector<int> bg_pool;
    std::vector<int> matched(proposals.size(), -1);
    for (std::size_t p = 0; p < proposals.size(); ++p) {
        double best = 0.0;
        int best_g = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gts[g].ignore) continue;
            const double iou = box_iou(proposals[p], gts[g]);
            if (iou > best) {
                best = iou;
                best_g = static_cast<int>(g);
            }
        }
        matched[p] = best_g;
        if (best >= cfg.fg_iou) {
            fg_pool.push_back(static_cast<int>(p));
        } else if (best >= cfg.bg_iou_lo) {
            bg_pool.push_back(static_cast<int>(p));
        }
    }

    Rng rng(seed);
    const std::size_t fg_want =
        static_cast<std::size_t>(cfg.batch * cfg.fg_fraction);
    if (fg_pool.size() > fg_want) {
        rng.shuffle(fg_pool);
        fg_pool.resize(fg_want);
        std::sort(fg_pool.begin(), fg_pool.end());
    }
    const std::size_t bg_want = static_cast<std::size_t>(cfg.batch) - fg_pool.size();
    if (bg_pool.size() > bg_want) {
        rng.shuffle(bg_pool);
        bg_pool.resize(bg_want);
        std::sort(bg_pool.begin(), bg_pool.end());
    }

    std::vector<RoiSample> samples;
    samples.reserve(fg_pool.size() + bg_pool.size());
    for (int p : fg_pool) {
        RoiSample s;
        s.proposal = p;
        s.label = 1;
        s.matched_gt = matched[p];
        s.target = encode_box(proposals[p], gts[matched[p]]);
        samples.push_back(s);
    }
    for (int p : bg_pool) {
        RoiSample s;
        s.proposal = p;
        s.label = 0;
        samples.push_back(s);
    }
    return samples;
}

}  // namespace textkernel
