#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "textkernel/errors.hpp"
#include "textkernel/evaluation.hpp"
#include "textkernel/io.hpp"
#include "textkernel/labelgen.hpp"
#include "textkernel/loss.hpp"
#include "textkernel/postprocess.hpp"
#include "textkernel/rng.hpp"

namespace fs = std::filesystem;
using namespace textkernel;

namespace {

// exit 2 per the CLI contract
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<fs::path> list_files(const std::string& dir, const std::string& ext) {
    if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ext) continue;
        if (entry.path().filename() == "manifest.ndjson") continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::string trim(const std::string& s) {
    const auto from = s.find_first_not_of(" \t\r");
    if (from == std::string::npos) return "";
    return s.substr(from, s.find_last_not_of(" \t\r") - from + 1);
}

double parse_double(const std::string& v) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != v.size()) throw UsageError("not a number: '" + v + "'");
    return d;
}

long long parse_int(const std::string& v) {
    std::size_t pos = 0;
    long long i = 0;
    try {
        i = std::stoll(v, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != v.size()) throw UsageError("not an integer: '" + v + "'");
    return i;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw UsageError("not a boolean: '" + v + "'");
}

// Flat key=value config files override already-parsed flags, so they are
// applied after CLI11 finishes. Keys are the long option names, dashes kept.
class ConfigMap {
public:
    ConfigMap& number(const std::string& key, double& dst) {
        setters_[key] = [&dst](const std::string& v) { dst = parse_double(v); };
        return *this;
    }
    ConfigMap& number(const std::string& key, int& dst) {
        setters_[key] = [&dst](const std::string& v) { dst = static_cast<int>(parse_int(v)); };
        return *this;
    }
    ConfigMap& number(const std::string& key, std::uint64_t& dst) {
        setters_[key] = [&dst](const std::string& v) {
            dst = static_cast<std::uint64_t>(parse_int(v));
        };
        return *this;
    }
    ConfigMap& text(const std::string& key, std::string& dst) {
        setters_[key] = [&dst](const std::string& v) { dst = v; };
        return *this;
    }
    ConfigMap& flag(const std::string& key, bool& dst) {
        setters_[key] = [&dst](const std::string& v) { dst = parse_bool(v); };
        return *this;
    }

    void apply(const std::string& path) const {
        std::istringstream in(read_file(path));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string where = path + ":" + std::to_string(line_no);
            const std::string s = trim(line);
            if (s.empty() || s[0] == '#') continue;
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw UsageError(where + ": expected key=value");
            const std::string key = trim(s.substr(0, eq));
            const std::string value = trim(s.substr(eq + 1));
            const auto it = setters_.find(key);
            if (it == setters_.end()) throw UsageError(where + ": unknown config key '" + key + "'");
            try {
                it->second(value);
            } catch (const UsageError& e) {
                throw UsageError(where + ": " + e.what());
            }
        }
    }

private:
    std::map<std::string, std::function<void(const std::string&)>> setters_;
};

struct LabelgenOpts {
    std::string annots;
    std::string out;
    int width = 0;
    int height = 0;
    bool from_manifest = false;
    double shrink = 0.6;
    int threads = 0;
    std::string config;
};

void run_labelgen(const LabelgenOpts& o) {
    const auto files = list_files(o.annots, ".ndjson");
    if (files.empty()) throw UsageError("no annotation files (*.ndjson) in " + o.annots);

    std::map<std::string, std::pair<int, int>> sizes;
    if (o.from_manifest) {
        for (const ManifestEntry& m :
             read_manifest((fs::path(o.annots) / "manifest.ndjson").string())) {
            sizes[m.id] = {m.width, m.height};
        }
    } else if (o.width <= 0 || o.height <= 0) {
        throw UsageError("--width and --height are required without --size-from-manifest");
    }
    if (!(o.shrink > 0.0 && o.shrink <= 1.0)) throw UsageError("--shrink-ratio must be in (0,1]");
    fs::create_directories(o.out);

    std::mutex log_mutex;
    parallel_for(files.size(), resolve_workers(o.threads), [&](std::size_t i) {
        const std::string id = files[i].stem().string();
        int w = o.width;
        int h = o.height;
        if (o.from_manifest) {
            const auto it = sizes.find(id);
            if (it == sizes.end()) throw UsageError("no manifest entry for image " + id);
            w = it->second.first;
            h = it->second.second;
        }
        const std::vector<Annotation> annots = read_annotations(files[i].string());
        int collapses = 0;
        const ClassMask classes = generate_class_mask(annots, w, h, o.shrink, &collapses);
        if (collapses) {
            std::lock_guard<std::mutex> lock(log_mutex);
            std::cerr << "labelgen: " << id << ": " << collapses
                      << " kernel collapse fallback(s)\n";
        }
        const fs::path out(o.out);
        write_pgm((out / (id + "_classes.pgm")).string(), classes);
        write_pgm((out / (id + "_text.pgm")).string(), generate_text_mask(annots, w, h));
        write_pgm((out / (id + "_ignore.pgm")).string(), generate_ignore_mask(annots, w, h));
    });
}

struct PostOpts {
    std::string probmaps;
    std::string out;
    double bin_thr = 0.65;
    double unclip_ratio = 1.5;
    std::string mode = "polygon";
    double box_thr = 0.6;
    int min_area = 4;
    int connectivity = 8;
    int threads = 0;
    std::string config;
};

DetectConfig detect_config(double bin_thr, double unclip_ratio, const std::string& mode,
                           double box_thr, int min_area, int connectivity) {
    // config files bypass the CLI-level value checks, so repeat them here
    if (mode != "polygon" && mode != "rect") {
        throw UsageError("mode must be polygon or rect, got '" + mode + "'");
    }
    if (connectivity != 4 && connectivity != 8) {
        throw UsageError("connectivity must be 4 or 8");
    }
    DetectConfig cfg;
    cfg.bin_thr = bin_thr;
    cfg.r_prime = unclip_ratio;
    cfg.box_score_thr = box_thr;
    cfg.min_area_px = min_area;
    cfg.connectivity = connectivity;
    cfg.output_mode = mode == "rect" ? OutputMode::kMinAreaRect : OutputMode::kPolygon;
    return cfg;
}

void run_postprocess(const PostOpts& o) {
    const auto files = list_files(o.probmaps, ".pmap");
    if (files.empty()) throw UsageError("no probability maps (*.pmap) in " + o.probmaps);
    const DetectConfig cfg = detect_config(o.bin_thr, o.unclip_ratio, o.mode, o.box_thr,
                                           o.min_area, o.connectivity);
    fs::create_directories(o.out);

    std::vector<DetectionResult> results(files.size());
    parallel_for(files.size(), resolve_workers(o.threads), [&](std::size_t i) {
        const ProbMap prob = read_pmap(files[i].string());
        results[i] = detect(prob, cfg);
        std::vector<Detection> dets;
        dets.reserve(results[i].polygons.size());
        for (std::size_t k = 0; k < results[i].polygons.size(); ++k) {
            dets.push_back({results[i].polygons[k], results[i].scores[k]});
        }
        const std::string id = files[i].stem().string();
        write_detections((fs::path(o.out) / (id + ".ndjson")).string(), dets);
    });

    std::int64_t components = 0;
    std::int64_t kept = 0;
    for (const DetectionResult& r : results) {
        components += r.component_count;
        kept += r.kept_count;
    }
    std::printf("images=%zu components=%lld kept=%lld\n", files.size(),
                static_cast<long long>(components), static_cast<long long>(kept));
}

struct EvalOpts {
    std::string dets;
    std::string gts;
    std::string report;
    double iou = 0.5;
    int threads = 0;
    std::string config;
};

void run_eval(const EvalOpts& o) {
    const auto gt_files = list_files(o.gts, ".ndjson");
    if (gt_files.empty()) throw UsageError("no ground-truth files (*.ndjson) in " + o.gts);
    if (!fs::is_directory(o.dets)) throw UsageError("not a directory: " + o.dets);

    std::vector<PerImageStats> stats(gt_files.size());
    parallel_for(gt_files.size(), resolve_workers(o.threads), [&](std::size_t i) {
        const std::string id = gt_files[i].stem().string();
        const std::vector<Annotation> gts = read_annotations(gt_files[i].string());
        const fs::path det_path = fs::path(o.dets) / (id + ".ndjson");
        std::vector<Detection> dets;
        if (fs::exists(det_path)) dets = read_detections(det_path.string());
        const MatchResult m = match_image(dets, gts, o.iou);
        stats[i] = {m.tp, m.fp, m.fn, 0.0};
    });

    const EvalReport rep = aggregate(stats);
    std::printf("precision=%.4f recall=%.4f fmeasure=%.4f\n", rep.precision, rep.recall,
                rep.fmeasure);
    std::printf("tp=%lld fp=%lld fn=%lld images=%zu\n", static_cast<long long>(rep.tp),
                static_cast<long long>(rep.fp), static_cast<long long>(rep.fn), gt_files.size());
    if (!o.report.empty()) {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "tp=%lld\nfp=%lld\nfn=%lld\nprecision=%.4f\nrecall=%.4f\nfmeasure=%.4f\n"
                      "images=%zu\n",
                      static_cast<long long>(rep.tp), static_cast<long long>(rep.fp),
                      static_cast<long long>(rep.fn), rep.precision, rep.recall, rep.fmeasure,
                      gt_files.size());
        write_file_atomic(o.report, buf);
    }
}

struct BenchOpts {
    std::string probmaps;
    int repeat = 1;
    int warmup = 2;
    double bin_thr = 0.65;
    double unclip_ratio = 1.5;
    std::string mode = "polygon";
    double box_thr = 0.6;
    int min_area = 4;
    int connectivity = 8;
    std::string config;
};

void run_bench(const BenchOpts& o) {
    if (o.repeat < 1) throw UsageError("--repeat must be >= 1");
    if (o.warmup < 0) throw UsageError("--warmup must be >= 0");
    const auto files = list_files(o.probmaps, ".pmap");
    if (files.empty()) throw UsageError("no probability maps (*.pmap) in " + o.probmaps);
    const DetectConfig cfg = detect_config(o.bin_thr, o.unclip_ratio, o.mode, o.box_thr,
                                           o.min_area, o.connectivity);

    // single worker on purpose: timings must not contend
    std::vector<double> per_image_ms;
    std::int64_t components = 0;
    std::int64_t kept = 0;
    for (const fs::path& file : files) {
        const ProbMap prob = read_pmap(file.string());  // I/O excluded from timing
        for (int k = 0; k < o.warmup; ++k) detect(prob, cfg);
        double total = 0.0;
        DetectionResult last;
        for (int k = 0; k < o.repeat; ++k) {
            last = detect(prob, cfg);
            total += last.elapsed_ms;
        }
        per_image_ms.push_back(total / o.repeat);
        components += last.component_count;
        kept += last.kept_count;
    }

    double sum = 0.0;
    for (double ms : per_image_ms) sum += ms;
    std::vector<double> sorted = per_image_ms;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    const double n = static_cast<double>(files.size());
    std::printf("images=%zu repeat=%d warmup=%d\n", files.size(), o.repeat, o.warmup);
    std::printf("mean_ms=%.3f median_ms=%.3f fps=%.2f\n", sum / n, median,
                sum > 0.0 ? n / (sum / 1000.0) : 0.0);
    std::printf("mean_components=%.2f mean_boxes=%.2f\n", components / n, kept / n);
}

struct LossCheckOpts {
    std::uint64_t seed = 1;
    std::string size = "8x8";
    bool corrupt = false;
    std::string config;
};

int run_losscheck(const LossCheckOpts& o) {
    int h = 0;
    int w = 0;
    if (std::sscanf(o.size.c_str(), "%dx%d", &h, &w) != 2 || h < 1 || w < 1) {
        throw UsageError("--size must look like 8x8");
    }
    Rng rng(o.seed);

    // weighted cross entropy on a random softmax map
    ProbMap logits(h, w, 3);
    logits.logits = true;
    for (double& v : logits.data) v = rng.uniform(-1.5, 1.5);
    const ProbMap p = softmax(logits);
    ClassMask y(h, w);
    for (auto& v : y.data) v = static_cast<std::uint8_t>(rng.below(3));
    Mask ignore(h, w);
    for (auto& v : ignore.data) v = rng.uniform() < 0.1 ? 1 : 0;
    ClassWeights weights;
    try {
        weights = class_weights(SupervisionMode::kKernelBorderWkbn, count_classes(y));
    } catch (const DegenerateCountsError&) {
        weights = {1.0, 1.0, 1.0};  // tiny maps may miss a class entirely
    }
    SegLossResult seg = seg_loss(p, y, weights, &ignore, SupervisionMode::kKernelBorderWkbn);
    if (o.corrupt) seg.grad.data[0] += 0.25;

    auto sample_coords = [&](std::size_t n) {
        // index 0 always checked: it is the coordinate --corrupt-gradient poisons
        std::vector<std::size_t> coords{0};
        for (std::size_t k = 0; k < 64 && coords.size() < std::min<std::size_t>(10, n); ++k) {
            const std::size_t idx = rng.below(n);
            if (std::find(coords.begin(), coords.end(), idx) == coords.end()) {
                coords.push_back(idx);
            }
        }
        return coords;
    };

    const double err_seg = finite_difference_check(
        [&](const std::vector<double>& x) {
            ProbMap q = p;
            q.data = x;
            return seg_loss(q, y, weights, &ignore, SupervisionMode::kKernelBorderWkbn).loss;
        },
        p.data, seg.grad.data, sample_coords(p.data.size()));

    // dice loss on a random similarity map
    FeatureMap feat(h, w, 8);
    for (double& v : feat.data) v = rng.uniform(-1.0, 1.0);
    Mask kernel_mask(h, w);
    for (auto& v : kernel_mask.data) v = rng.uniform() < 0.3 ? 1 : 0;
    if (std::find(kernel_mask.data.begin(), kernel_mask.data.end(), 1) == kernel_mask.data.end()) {
        kernel_mask.at(0, 0) = 1;
    }
    const ScoreMap s = gdsc_similarity(gdsc_pool(feat, kernel_mask), feat);
    Mask t(h, w);
    for (auto& v : t.data) v = rng.uniform() < 0.4 ? 1 : 0;
    DiceLossResult dice = gdsc_loss(s, t);
    if (o.corrupt) dice.grad.data[0] += 0.25;

    const double err_gdsc = finite_difference_check(
        [&](const std::vector<double>& x) {
            ScoreMap q = s;
            q.data = x;
            return gdsc_loss(q, t).loss;
        },
        s.data, dice.grad.data, sample_coords(s.data.size()));

    // smooth L1 on random vectors
    std::vector<double> pred(8);
    std::vector<double> target(8);
    for (double& v : pred) v = rng.uniform(-2.0, 2.0);
    for (double& v : target) v = rng.uniform(-2.0, 2.0);
    const SmoothL1Result l1 = smooth_l1(pred, target);
    const double err_l1 = finite_difference_check(
        [&](const std::vector<double>& x) { return smooth_l1(x, target).loss; }, pred, l1.grad);

    const double tol = 1e-6;
    const bool pass = err_seg <= tol && err_gdsc <= tol && err_l1 <= tol;
    std::printf("seg=%.3e gdsc=%.3e smooth_l1=%.3e tol=%.0e %s\n", err_seg, err_gdsc, err_l1, tol,
                pass ? "PASS" : "FAIL");
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"text kernel detection toolkit"};
    app.require_subcommand(1);
    int exit_code = 0;

    LabelgenOpts lg;
    CLI::App* labelgen = app.add_subcommand("labelgen", "generate training masks from annotations");
    labelgen->add_option("--annots", lg.annots, "annotation directory (*.ndjson)")->required();
    labelgen->add_option("--out", lg.out, "output directory")->required();
    labelgen->add_option("--width", lg.width, "canvas width in px");
    labelgen->add_option("--height", lg.height, "canvas height in px");
    labelgen->add_flag("--size-from-manifest", lg.from_manifest,
                       "read per-image sizes from manifest.ndjson in the annotation dir");
    labelgen->add_option("--shrink-ratio", lg.shrink, "kernel shrink ratio")->capture_default_str();
    labelgen->add_option("--threads", lg.threads, "worker threads (0 = auto)");
    labelgen->add_option("--config", lg.config, "flat key=value file overriding any flag");
    labelgen->callback([&] {
        if (!lg.config.empty()) {
            ConfigMap()
                .text("annots", lg.annots)
                .text("out", lg.out)
                .number("width", lg.width)
                .number("height", lg.height)
                .flag("size-from-manifest", lg.from_manifest)
                .number("shrink-ratio", lg.shrink)
                .number("threads", lg.threads)
                .apply(lg.config);
        }
        run_labelgen(lg);
    });

    PostOpts po;
    CLI::App* post = app.add_subcommand("postprocess", "probability maps to detection polygons");
    post->add_option("--probmaps", po.probmaps, "directory of *.pmap files")->required();
    post->add_option("--out", po.out, "output directory")->required();
    post->add_option("--bin-thr", po.bin_thr, "binarization threshold")->capture_default_str();
    post->add_option("--unclip", po.unclip_ratio, "unclip ratio r'")->capture_default_str();
    post->add_option("--mode", po.mode, "output mode")->capture_default_str()
        ->check(CLI::IsMember({"polygon", "rect"}));
    post->add_option("--box-thr", po.box_thr, "minimum mean kernel probability")->capture_default_str();
    post->add_option("--min-area", po.min_area, "minimum component pixel count")->capture_default_str();
    post->add_option("--connectivity", po.connectivity, "CCL connectivity")->capture_default_str()
        ->check(CLI::IsMember({4, 8}));
    post->add_option("--threads", po.threads, "worker threads (0 = auto)");
    post->add_option("--config", po.config, "flat key=value file overriding any flag");
    post->callback([&] {
        if (!po.config.empty()) {
            ConfigMap()
                .text("probmaps", po.probmaps)
                .text("out", po.out)
                .number("bin-thr", po.bin_thr)
                .number("unclip", po.unclip_ratio)
                .text("mode", po.mode)
                .number("box-thr", po.box_thr)
                .number("min-area", po.min_area)
                .number("connectivity", po.connectivity)
                .number("threads", po.threads)
                .apply(po.config);
        }
        run_postprocess(po);
    });

    EvalOpts ev;
    CLI::App* eval = app.add_subcommand("eval", "score detections against ground truth");
    eval->add_option("--dets", ev.dets, "directory of detection *.ndjson files")->required();
    eval->add_option("--gts", ev.gts, "directory of ground-truth *.ndjson files")->required();
    eval->add_option("--iou", ev.iou, "match IoU threshold")->capture_default_str();
    eval->add_option("--report", ev.report, "write a key=value report file");
    eval->add_option("--threads", ev.threads, "worker threads (0 = auto)");
    eval->add_option("--config", ev.config, "flat key=value file overriding any flag");
    eval->callback([&] {
        if (!ev.config.empty()) {
            ConfigMap()
                .text("dets", ev.dets)
                .text("gts", ev.gts)
                .number("iou", ev.iou)
                .text("report", ev.report)
                .number("threads", ev.threads)
                .apply(ev.config);
        }
        run_eval(ev);
    });

    BenchOpts be;
    CLI::App* bench = app.add_subcommand("bench", "time the detect pipeline");
    bench->add_option("--probmaps", be.probmaps, "directory of *.pmap files")->required();
    bench->add_option("--repeat", be.repeat, "timed repeats per image")->capture_default_str();
    bench->add_option("--warmup", be.warmup, "untimed repeats per image")->capture_default_str();
    bench->add_option("--bin-thr", be.bin_thr, "binarization threshold")->capture_default_str();
    bench->add_option("--unclip", be.unclip_ratio, "unclip ratio r'")->capture_default_str();
    bench->add_option("--mode", be.mode, "output mode")->capture_default_str()
        ->check(CLI::IsMember({"polygon", "rect"}));
    bench->add_option("--box-thr", be.box_thr, "minimum mean kernel probability")->capture_default_str();
    bench->add_option("--min-area", be.min_area, "minimum component pixel count")->capture_default_str();
    bench->add_option("--connectivity", be.connectivity, "CCL connectivity")->capture_default_str()
        ->check(CLI::IsMember({4, 8}));
    bench->add_option("--config", be.config, "flat key=value file overriding any flag");
    bench->callback([&] {
        if (!be.config.empty()) {
            ConfigMap()
                .text("probmaps", be.probmaps)
                .number("repeat", be.repeat)
                .number("warmup", be.warmup)
                .number("bin-thr", be.bin_thr)
                .number("unclip", be.unclip_ratio)
                .text("mode", be.mode)
                .number("box-thr", be.box_thr)
                .number("min-area", be.min_area)
                .number("connectivity", be.connectivity)
                .apply(be.config);
        }
        run_bench(be);
    });

    LossCheckOpts lc;
    CLI::App* losscheck = app.add_subcommand("losscheck", "finite-difference gradient check");
    losscheck->add_option("--seed", lc.seed, "rng seed")->capture_default_str();
    losscheck->add_option("--size", lc.size, "fixture size HxW")->capture_default_str();
    losscheck->add_flag("--corrupt-gradient", lc.corrupt)->group("");
    losscheck->add_option("--config", lc.config, "flat key=value file overriding any flag");
    losscheck->callback([&] {
        if (!lc.config.empty()) {
            ConfigMap().number("seed", lc.seed).text("size", lc.size).apply(lc.config);
        }
        exit_code = run_losscheck(lc);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NotFoundError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const InvalidGeometryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}
