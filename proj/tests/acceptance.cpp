// Acceptance gate: one line per criterion, nonzero exit when any fails.
// Tolerances are pinned inline next to each check.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "textkernel/evaluation.hpp"
#include "textkernel/io.hpp"
#include "textkernel/labelgen.hpp"
#include "textkernel/loss.hpp"
#include "textkernel/postprocess.hpp"
#include "textkernel/rng.hpp"
#include "textkernel/tdm.hpp"

using namespace textkernel;
namespace fs = std::filesystem;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string format(const char* fmt, ...) {
    char buf[256];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    return buf;
}

ProbMap random_prob(Rng& rng, int h, int w, int c) {
    ProbMap logits(h, w, c);
    logits.logits = true;
    for (double& v : logits.data) v = rng.uniform(-1.5, 1.5);
    return softmax(logits);
}

std::vector<std::size_t> random_coords(Rng& rng, std::size_t n, std::size_t want) {
    std::vector<std::size_t> coords;
    while (coords.size() < want) {
        const std::size_t idx = rng.below(n);
        if (std::find(coords.begin(), coords.end(), idx) == coords.end()) coords.push_back(idx);
    }
    return coords;
}

Box random_box(Rng& rng, double extent) {
    Box b;
    b.x_min = rng.uniform(0.0, extent - 4.0);
    b.y_min = rng.uniform(0.0, extent - 4.0);
    b.x_max = std::min(b.x_min + rng.uniform(2.0, extent / 2.0), extent);
    b.y_max = std::min(b.y_min + rng.uniform(2.0, extent / 2.0), extent);
    b.score = rng.uniform(0.0, 1.0);
    return b;
}

bool same_box(const Box& a, const Box& b) {
    return a.x_min == b.x_min && a.y_min == b.y_min && a.x_max == b.x_max &&
           a.y_max == b.y_max && a.score == b.score;
}

void paint_block(ProbMap& p, int r0, int r1, int c0, int c1, double value) {
    for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) p.at(r, c, p.channels == 3 ? 1 : 0) = value;
    }
}

bool covers_block(const Mask& m, int r0, int r1, int c0, int c1) {
    for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
            if (!m.at(r, c)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- criterion 1
bool gradient_correctness(std::string& detail) {
    const double t0 = now_ms();
    Rng rng(20260814);
    double worst = 0.0;

    for (int iter = 0; iter < 3; ++iter) {
        const ProbMap p = random_prob(rng, 8, 8, 3);
        ClassMask y(8, 8);
        for (auto& v : y.data) v = static_cast<std::uint8_t>(rng.below(3));
        const ClassWeights w = class_weights(SupervisionMode::kKernelBorderWkbn, count_classes(y));
        const SegLossResult seg = seg_loss(p, y, w);
        const double err = finite_difference_check(
            [&](const std::vector<double>& x) {
                ProbMap q = p;
                q.data = x;
                return seg_loss(q, y, w).loss;
            },
            p.data, seg.grad.data, random_coords(rng, p.data.size(), 12));
        worst = std::max(worst, err);
    }

    for (int iter = 0; iter < 3; ++iter) {
        FeatureMap feat(8, 8, 3);
        for (double& v : feat.data) v = rng.uniform(-1.0, 1.0);
        Mask kernel(8, 8);
        for (auto& v : kernel.data) v = rng.uniform() < 0.3 ? 1 : 0;
        kernel.at(0, 0) = 1;
        const ScoreMap s = gdsc_similarity(gdsc_pool(feat, kernel), feat);
        Mask t(8, 8);
        for (auto& v : t.data) v = rng.uniform() < 0.4 ? 1 : 0;
        const DiceLossResult dice = gdsc_loss(s, t);
        const double err = finite_difference_check(
            [&](const std::vector<double>& x) {
                ScoreMap q = s;
                q.data = x;
                return gdsc_loss(q, t).loss;
            },
            s.data, dice.grad.data, random_coords(rng, s.data.size(), 12));
        worst = std::max(worst, err);
    }

    const double elapsed = now_ms() - t0;
    detail = format("max rel err %.3e (tol 1e-6), %.0f ms (limit 1000)", worst, elapsed);
    return worst <= 1e-6 && elapsed < 1000.0;
}

// ---------------------------------------------------------------- criterion 2
bool loss_exactness(std::string& detail) {
    ProbMap p(1, 2, 3, 1.0 / 3.0);
    ClassMask y(1, 2);
    y.at(0, 0) = 1;
    y.at(0, 1) = 0;
    const double seg = seg_loss(p, y, {1.0, 2.0, 3.0}).loss;
    const double want_seg = 1.5 * std::log(3.0);
    const bool seg_ok = std::abs(seg - want_seg) <= 1e-12;

    ScoreMap s(2, 2, 0.5);  // sigmoid(0) everywhere
    Mask t(2, 2);
    t.at(0, 0) = 1;
    t.at(0, 1) = 1;
    const double dice = gdsc_loss(s, t).loss;
    const bool dice_ok = dice == 0.5;

    const ClassCounts counts{90, 6, 4};
    const bool w3_ok =
        class_weights(SupervisionMode::kKernelBorderWkbn, counts) == ClassWeights{1.0, 15.0, 22.5};
    const bool w2_ok =
        class_weights(SupervisionMode::kKernelWkn, counts) == ClassWeights{1.0, 94.0 / 6.0};

    detail = format("seg %.17g vs %.17g, dice %.17g, weights %s/%s", seg, want_seg, dice,
                    w3_ok ? "ok" : "bad", w2_ok ? "ok" : "bad");
    return seg_ok && dice_ok && w3_ok && w2_ok;
}

// ---------------------------------------------------------------- criterion 3
bool labelgen_geometry(std::string& detail) {
    const Polygon square({{0.5, 0.5}, {10.5, 0.5}, {10.5, 10.5}, {0.5, 10.5}});
    const double offset = shrink_offset(square, 0.6);
    const bool offset_ok = offset == 1.6;  // 100 * (1 - 0.36) / 40

    const std::vector<Annotation> annots{{square, false, std::nullopt}};
    const ClassMask classes = generate_class_mask(annots, 16, 16, 0.6);
    int kernel_count = 0;
    for (std::uint8_t v : classes.data) kernel_count += v == 1;
    const bool count_ok = std::abs(kernel_count - 46) <= 4;

    const ClassMask full = generate_class_mask(annots, 16, 16, 1.0);
    const Mask text = rasterize_fill(square, 16, 16);
    bool identity_ok = true;
    for (std::size_t i = 0; i < text.data.size(); ++i) {
        const std::uint8_t want = text.data[i] ? 1 : 0;
        if (full.data[i] != want) identity_ok = false;
    }

    detail = format("offset %.17g, kernel px %d (46 +/- 4), r=1 identity %s", offset, kernel_count,
                    identity_ok ? "ok" : "bad");
    return offset_ok && count_ok && identity_ok;
}

// ---------------------------------------------------------------- criterion 4
bool postprocess_formulas(std::string& detail) {
    const Polygon sq({{10.0, 10.0}, {16.8, 10.0}, {16.8, 16.8}, {10.0, 16.8}});
    const double d = polygon_area(sq) * 1.5 / polygon_perimeter(sq);
    const bool d_ok = std::abs(d - 2.55) <= 1e-12;

    const Polygon grown = unclip(sq, 1.5);
    const double closed_form = oracle::rounded_rect_area(6.8, 6.8, 2.55);
    const double area = polygon_area(grown);
    const bool area_ok = std::abs(area - closed_form) / closed_form <= 0.01;

    const Polygon same = unclip(sq, 0.0);
    bool identity_ok = same.size() == sq.size();
    for (std::size_t i = 0; identity_ok && i < sq.size(); ++i) {
        identity_ok = same[i].x == sq[i].x && same[i].y == sq[i].y;
    }

    detail = format("D' %.17g, area %.4f vs %.4f (tol 1%%), r'=0 identity %s", d, area, closed_form,
                    identity_ok ? "ok" : "bad");
    return d_ok && area_ok && identity_ok;
}

// ---------------------------------------------------------------- criterion 5
bool ccl_oracle_equivalence(std::string& detail) {
    const double t0 = now_ms();
    Rng rng(5150);
    int checked = 0;
    for (int iter = 0; iter < 200; ++iter) {
        Mask m(32, 32);
        const double density = 0.15 + 0.7 * rng.uniform();
        for (auto& v : m.data) v = rng.uniform() < density ? 1 : 0;
        for (int connectivity : {4, 8}) {
            const Components got = connected_components(m, connectivity);
            const LabelMap want = oracle::ccl(m, connectivity);
            if (!(got.labels == want)) {
                detail = format("mismatch at raster %d connectivity %d", iter, connectivity);
                return false;
            }
            ++checked;
        }
    }
    const double elapsed = now_ms() - t0;
    detail = format("%d labelings equal, %.0f ms (limit 5000)", checked, elapsed);
    return elapsed < 5000.0;
}

// ---------------------------------------------------------------- criterion 6
bool tdm_oracles(std::string& detail) {
    Rng rng(606);
    for (int scene = 0; scene < 100; ++scene) {
        // nms against the repeated-max reference
        std::vector<Box> boxes;
        for (int i = 0; i < 60; ++i) boxes.push_back(random_box(rng, 96.0));
        boxes.push_back(boxes[10]);  // exact tie
        const double thr = rng.uniform(0.2, 0.7);
        const std::vector<Box> fast = nms(boxes, thr);
        const std::vector<Box> ref = oracle::nms(boxes, thr);
        if (fast.size() != ref.size()) {
            detail = format("nms size mismatch at scene %d", scene);
            return false;
        }
        for (std::size_t i = 0; i < fast.size(); ++i) {
            if (!same_box(fast[i], ref[i])) {
                detail = format("nms order mismatch at scene %d pos %zu", scene, i);
                return false;
            }
        }

        // rpn assignment against the brute-force IoU table
        std::vector<Box> anchors;
        for (int i = 0; i < 120; ++i) {
            Box a = random_box(rng, 128.0);
            if (rng.uniform() < 0.2) a.x_max = 130.0 + rng.uniform(0.0, 8.0);  // push out of bounds
            anchors.push_back(a);
        }
        std::vector<Box> gts;
        const int n_gts = 1 + static_cast<int>(rng.below(4));
        for (int g = 0; g < n_gts; ++g) {
            Box b = random_box(rng, 128.0);
            b.ignore = rng.uniform() < 0.3;
            gts.push_back(b);
        }
        const RpnConfig cfg;
        const AssignmentResult got = assign_rpn(anchors, gts, 128, 128, cfg);
        const oracle::RpnRef want = oracle::assign_rpn(anchors, gts, 128, 128, cfg.pos_iou,
                                                       cfg.neg_iou);
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            if (static_cast<int>(got.labels[i]) != want.labels[i] ||
                got.matched_gt[i] != want.matched[i]) {
                detail = format("assignment mismatch at scene %d anchor %zu", scene, i);
                return false;
            }
        }

        // encode/decode round trip
        for (int k = 0; k < 10; ++k) {
            const Box anchor = random_box(rng, 128.0);
            const Box gt = random_box(rng, 128.0);
            const Box back = decode_box(anchor, encode_box(anchor, gt));
            const double err = std::max({std::abs(back.x_min - gt.x_min),
                                         std::abs(back.y_min - gt.y_min),
                                         std::abs(back.x_max - gt.x_max),
                                         std::abs(back.y_max - gt.y_max)});
            if (err > 1e-9) {
                detail = format("roundtrip err %.3e at scene %d", err, scene);
                return false;
            }
        }
    }
    detail = "100 scenes: nms, assignment, and roundtrip all exact";
    return true;
}

// ---------------------------------------------------------------- criterion 7
bool end_to_end_detect(std::string& detail) {
    ProbMap prob(64, 64, 3, 0.05);
    paint_block(prob, 8, 16, 8, 16, 0.9);
    paint_block(prob, 40, 52, 30, 46, 0.92);
    const DetectionResult res = detect(prob);
    if (res.polygons.size() != 2) {
        detail = format("expected 2 polygons, got %zu", res.polygons.size());
        return false;
    }
    int covering_first = 0;
    int covering_second = 0;
    for (const Polygon& poly : res.polygons) {
        const Mask re = rasterize_fill(poly, 64, 64);
        if (covers_block(re, 8, 16, 8, 16)) ++covering_first;
        if (covers_block(re, 40, 52, 30, 46)) ++covering_second;
    }
    if (covering_first != 1 || covering_second != 1) {
        detail = format("block coverage %d/%d, want 1/1", covering_first, covering_second);
        return false;
    }

    Rng rng(707);
    for (int iter = 0; iter < 100; ++iter) {
        ProbMap noise(32, 32, 1);
        for (double& v : noise.data) v = rng.uniform();
        const DetectionResult r = detect(noise);
        if (r.kept_count > r.component_count) {
            detail = format("kept %d > components %d at map %d", r.kept_count, r.component_count,
                            iter);
            return false;
        }
    }
    detail = "two-block map exact, kept <= components on 100 random maps";
    return true;
}

// ---------------------------------------------------------------- criterion 8
bool evaluation_exactness(std::string& detail) {
    const auto rect = [](double x0, double y0, double x1, double y1) {
        return Polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
    };
    std::vector<PerImageStats> per_image;
    {
        const std::vector<Annotation> gts{{rect(0, 0, 10, 10), false, std::nullopt},
                                          {rect(20, 0, 30, 10), false, std::nullopt}};
        const std::vector<Detection> dets{{rect(0, 0, 10, 10), 0.9}, {rect(20, 0, 30, 10), 0.8}};
        const MatchResult m = match_image(dets, gts);
        per_image.push_back({m.tp, m.fp, m.fn, 0.0});
    }
    {
        const std::vector<Annotation> gts{{rect(0, 0, 8, 8), false, std::nullopt},
                                          {rect(0, 20, 8, 28), false, std::nullopt}};
        const std::vector<Detection> dets{{rect(0, 0, 8, 8), 0.9},
                                          {rect(0, 20, 8, 28), 0.7},
                                          {rect(40, 40, 48, 48), 0.6}};
        const MatchResult m = match_image(dets, gts);
        per_image.push_back({m.tp, m.fp, m.fn, 0.0});
    }
    {
        const std::vector<Annotation> gts{{rect(0, 0, 10, 10), false, std::nullopt}};
        const std::vector<Detection> dets{{rect(30, 30, 40, 40), 0.5}};
        const MatchResult m = match_image(dets, gts);
        per_image.push_back({m.tp, m.fp, m.fn, 0.0});
    }
    const EvalReport rep = aggregate(per_image);
    const std::string p = format("%.4f", rep.precision);
    const std::string r = format("%.4f", rep.recall);
    const std::string f = format("%.4f", rep.fmeasure);
    const bool counts_ok = rep.tp == 4 && rep.fp == 2 && rep.fn == 1;
    const bool scores_ok = p == "0.6667" && r == "0.8000" && f == "0.7273";

    // one-to-one: a duplicated perfect detection must cost a false positive
    const std::vector<Annotation> gts{{rect(0, 0, 10, 10), false, std::nullopt}};
    const std::vector<Detection> dets{{rect(0, 0, 10, 10), 0.8}, {rect(0, 0, 10, 10), 0.9}};
    const MatchResult dup = match_image(dets, gts);
    const bool dup_ok = dup.tp == 1 && dup.fp == 1 && dup.fn == 0;

    detail = format("tp=%lld fp=%lld fn=%lld P=%s R=%s F=%s, duplicate %s",
                    static_cast<long long>(rep.tp), static_cast<long long>(rep.fp),
                    static_cast<long long>(rep.fn), p.c_str(), r.c_str(), f.c_str(),
                    dup_ok ? "ok" : "bad");
    return counts_ok && scores_ok && dup_ok;
}

// ---------------------------------------------------------------- criterion 9
bool cli_determinism(std::string& detail) {
    const std::string cli = TEXTKERNEL_CLI_PATH;
    const fs::path root =
        fs::temp_directory_path() / ("tk_acc_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const fs::path maps = root / "maps";
    fs::create_directories(maps);

    ProbMap a(48, 48, 1, 0.1);
    paint_block(a, 10, 30, 6, 40, 0.9);
    write_pmap((maps / "a.pmap").string(), a);
    ProbMap b(48, 48, 3, 0.05);
    paint_block(b, 20, 25, 20, 33, 0.95);
    write_pmap((maps / "b.pmap").string(), b);

    const fs::path gts = root / "gts";
    fs::create_directories(gts);
    write_file_atomic((gts / "a.ndjson").string(),
                      "{\"polygon\": [[3,7],[43,7],[43,33],[3,33]]}\n");
    write_file_atomic((gts / "b.ndjson").string(),
                      "{\"polygon\": [[18,18],[35,18],[35,27],[18,27]]}\n");

    auto run = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        return rc != -1 && WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
    };
    bool ok = true;
    for (int pass = 1; pass <= 2; ++pass) {
        const std::string out = (root / ("dets" + std::to_string(pass))).string();
        const std::string report = (root / ("report" + std::to_string(pass) + ".txt")).string();
        ok = ok && run("postprocess --probmaps " + maps.string() + " --out " + out);
        ok = ok && run("eval --dets " + out + " --gts " + gts.string() + " --report " + report);
    }
    if (!ok) {
        detail = "cli invocation failed";
        fs::remove_all(root);
        return false;
    }
    bool identical = true;
    for (const std::string name : {"a.ndjson", "b.ndjson"}) {
        identical = identical && read_file((root / "dets1" / name).string()) ==
                                     read_file((root / "dets2" / name).string());
    }
    identical = identical && read_file((root / "report1.txt").string()) ==
                                 read_file((root / "report2.txt").string());
    fs::remove_all(root);
    detail = identical ? "detections and reports byte-identical across runs"
                       : "byte difference between runs";
    return identical;
}

// --------------------------------------------------------------- criterion 10
bool throughput_floor(std::string& detail) {
    ProbMap prob(640, 640, 1, 0.1);
    Rng rng(1010);
    int blobs = 0;
    for (int by = 0; by < 4; ++by) {
        for (int bx = 0; bx < 3; ++bx) {
            const int r0 = 40 + by * 150 + static_cast<int>(rng.below(20));
            const int c0 = 40 + bx * 200 + static_cast<int>(rng.below(30));
            const int h = 30 + static_cast<int>(rng.below(40));
            const int w = 50 + static_cast<int>(rng.below(80));
            paint_block(prob, r0, r0 + h, c0, c0 + w, 0.9);
            ++blobs;
        }
    }

    std::vector<double> ms;
    int components = 0;
    for (int k = 0; k < 15; ++k) {
        const DetectionResult res = detect(prob);
        components = res.component_count;
        ms.push_back(res.elapsed_ms);
    }
    std::sort(ms.begin(), ms.end());
    const double median = ms[ms.size() / 2];
    detail = format("%d blobs -> %d components, median %.3f ms (limit 10)", blobs, components,
                    median);
    return components <= 20 && median < 10.0;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        bool (*fn)(std::string&);
    };
    const Criterion criteria[] = {
        {"gradient correctness (seg + gdsc finite differences)", gradient_correctness},
        {"loss exactness (hand fixtures and class weights)", loss_exactness},
        {"label generation geometry (shrink offset and kernel raster)", labelgen_geometry},
        {"post-process formulas (unclip distance and area)", postprocess_formulas},
        {"connected components equal the flood-fill oracle", ccl_oracle_equivalence},
        {"nms, rpn assignment, and box coding oracles", tdm_oracles},
        {"end-to-end detect on synthetic maps", end_to_end_detect},
        {"evaluation exactness (triple fixture and duplicates)", evaluation_exactness},
        {"cli postprocess + eval determinism", cli_determinism},
        {"throughput floor on a 640x640 map", throughput_floor},
    };

    int failures = 0;
    int index = 0;
    for (const Criterion& c : criteria) {
        ++index;
        std::string detail;
        bool pass = false;
        try {
            pass = c.fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("criterion %2d [%s] %s%s%s%s\n", index, pass ? "PASS" : "FAIL", c.name,
                    detail.empty() ? "" : " - ", detail.c_str(), "");
        if (!pass) ++failures;
    }
    if (failures) {
        std::printf("%d of 10 criteria failed\n", failures);
        return 1;
    }
    std::printf("all 10 criteria passed\n");
    return 0;
}
