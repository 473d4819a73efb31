#include "textkernel/evaluation.hpp"

#include <algorithm>
#include <numeric>

namespace textkernel {

MatchResult match_image(const std::vector<Detection>& dets, const std::vector<Annotation>& gts,
                        double iou_thr) {
    // step (a): drop detections swallowed by a do-not-care region
    std::vector<std::size_t> surviving;
    for (std::size_t d = 0; d < dets.size(); ++d) {
        bool swallowed = false;
        for (const Annotation& g : gts) {
            if (!g.ignore) continue;
            const PolygonOverlap ov = polygon_overlap(dets[d].polygon, g.polygon);
            if (ov.area_a > 0 &&
                static_cast<double>(ov.intersection) / static_cast<double>(ov.area_a) > 0.5) {
                swallowed = true;
                break;
            }
        }
        if (!swallowed) surviving.push_back(d);
    }

    std::stable_sort(surviving.begin(), surviving.end(), [&](std::size_t a, std::size_t b) {
        return dets[a].score > dets[b].score;
    });

    MatchResult res;
    std::vector<char> gt_taken(gts.size(), 0);
    int live_gts = 0;
    for (const Annotation& g : gts) {
        if (!g.ignore) ++live_gts;
    }

    for (std::size_t d : surviving) {
        double best = 0.0;
        int best_g = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gts[g].ignore || gt_taken[g]) continue;
            const double iou = polygon_iou(dets[d].polygon, gts[g].polygon);
            if (iou > best) {  // ties keep the lowest gt index
                best = iou;
                best_g = static_cast<int>(g);
            }
        }
        if (best_g >= 0 && best >= iou_thr) {
            gt_taken[best_g] = 1;
            res.matches.emplace_back(static_cast<int>(d), best_g);
        }
    }
    res.tp = static_cast<int>(res.matches.size());
    res.fp = static_cast<int>(surviving.size()) - res.tp;
    res.fn = live_gts - res.tp;
    return res;
}

EvalReport aggregate(const std::vector<PerImageStats>& per_image) {
    EvalReport rep;
    rep.per_image = per_image;
    double total_ms = 0.0;
    for (const PerImageStats& s : per_image) {
        rep.tp += s.tp;
        rep.fp += s.fp;
        rep.fn += s.fn;
        total_ms += s.ms;
    }
    const double tp = static_cast<double>(rep.tp);
    rep.precision = rep.tp + rep.fp > 0 ? tp / static_cast<double>(rep.tp + rep.fp) : 0.0;
    rep.recall = rep.tp + rep.fn > 0 ? tp / static_cast<double>(rep.tp + rep.fn) : 0.0;
    rep.fmeasure = rep.precision + rep.recall > 0.0
                       ? 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall)
                       : 0.0;

    if (!per_image.empty()) {
        rep.mean_ms = total_ms / static_cast<double>(per_image.size());
        std::vector<double> ms;
        ms.reserve(per_image.size());
        for (const PerImageStats& s : per_image) ms.push_back(s.ms);
        std::sort(ms.begin(), ms.end());
        const std::size_t mid = ms.size() / 2;
        rep.median_ms = ms.size() % 2 ? ms[mid] : 0.5 * (ms[mid - 1] + ms[mid]);
        if (total_ms > 0.0) {
            rep.fps = static_cast<double>(per_image.size()) / (total_ms / 1000.0);
        }
    }
    return rep;
}

}  // namespace textkernel
