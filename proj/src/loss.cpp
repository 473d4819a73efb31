#include "textkernel/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "textkernel/errors.hpp"

namespace textkernel {
namespace {

constexpr double kLogEps = 1e-12;

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

ClassCounts count_classes(const ClassMask& y) {
    ClassCounts c;
    for (std::uint8_t v : y.data) {
        if (v == 0) {
            ++c.non_text;
        } else if (v == 1) {
            ++c.kernel;
        } else {
            ++c.border;
        }
    }
    return c;
}

ProbMap softmax(const ProbMap& logits) {
    ProbMap out(logits.height, logits.width, logits.channels);
    out.logits = false;
    const int c = logits.channels;
    const std::size_t pixels = static_cast<std::size_t>(logits.height) * logits.width;
    for (std::size_t px = 0; px < pixels; ++px) {
        const double* in = logits.data.data() + px * c;
        double* o = out.data.data() + px * c;
        double m = in[0];
        for (int k = 1; k < c; ++k) m = std::max(m, in[k]);
        double sum = 0.0;
        for (int k = 0; k < c; ++k) {
            o[k] = std::exp(in[k] - m);
            sum += o[k];
        }
        for (int k = 0; k < c; ++k) o[k] /= sum;
    }
    return out;
}

ClassWeights class_weights(SupervisionMode mode, const ClassCounts& counts) {
    auto ratio = [](std::int64_t num, std::int64_t den) -> double {
        if (den == 0) {
            if (num == 0) return 1.0;
            throw DegenerateCountsError("class weight denominator is zero");
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    if (mode == SupervisionMode::kKernelOnly) {
        return {1.0, 1.0, 1.0};
    }
    if (counts.kernel == 0 && counts.border == 0) {
        // textless image: balancing is undefined, fall back to uniform
        return mode == SupervisionMode::kKernelWkn ? ClassWeights{1.0, 1.0}
                                                   : ClassWeights{1.0, 1.0, 1.0};
    }
    if (mode == SupervisionMode::kKernelWkn) {
        return {1.0, ratio(counts.non_text + counts.border, counts.kernel)};
    }
    return {1.0, ratio(counts.non_text, counts.kernel), ratio(counts.non_text, counts.border)};
}

SegLossResult seg_loss(const ProbMap& p, const ClassMask& y, const ClassWeights& w,
                       const Mask* ignore, SupervisionMode mode) {
    require(p.height == y.height && p.width == y.width, "seg_loss: shape mismatch");
    require(!ignore || (ignore->height == p.height && ignore->width == p.width),
            "seg_loss: ignore shape mismatch");
    const int c = p.channels;
    const bool full = mode == SupervisionMode::kKernelBorderWkbn;
    if (full) {
        require(c == 3 && w.size() == 3, "seg_loss: three-class mode needs 3 channels/weights");
    } else if (mode == SupervisionMode::kTextWkbn) {
        require(c == 3 && w.size() == 3, "seg_loss: text mode needs 3 channels/weights");
    } else {
        require(c == 3 || c == 2, "seg_loss: folded modes need 2 or 3 channels");
        require(w.size() == 3 || w.size() == 2, "seg_loss: weights of length 2 or 3");
        if (mode == SupervisionMode::kKernelWkbn) {
            require(w.size() == 3, "seg_loss: mode 3 needs three-class weights");
        }
    }

    SegLossResult res;
    res.grad = ProbMap(p.height, p.width, c);
    const double hw = static_cast<double>(p.height) * p.width;
    double acc = 0.0;
    for (int row = 0; row < p.height; ++row) {
        for (int col = 0; col < p.width; ++col) {
            if (ignore && ignore->at(row, col)) continue;
            const int cls = y.at(row, col);

            // folded probability of the target plus the channels it covers
            double pt = 0.0;
            int group[3];
            int group_n = 0;
            int folded = 0;
            if (full) {
                pt = p.at(row, col, cls);
                group[group_n++] = cls;
                folded = cls;
            } else if (mode == SupervisionMode::kTextWkbn) {
                folded = cls != 0 ? 1 : 0;
                if (folded) {
                    pt = p.at(row, col, 1) + p.at(row, col, 2);
                    group[group_n++] = 1;
                    group[group_n++] = 2;
                } else {
                    pt = p.at(row, col, 0);
                    group[group_n++] = 0;
                }
            } else {
                folded = cls == 1 ? 1 : 0;
                if (c == 2) {
                    pt = p.at(row, col, folded);
                    group[group_n++] = folded;
                } else if (folded) {
                    pt = p.at(row, col, 1);
                    group[group_n++] = 1;
                } else {
                    pt = p.at(row, col, 0) + p.at(row, col, 2);
                    group[group_n++] = 0;
                    group[group_n++] = 2;
                }
            }

            const double weight = w.size() == 3 ? w[cls] : w[folded];
            acc += weight * -std::log(std::max(pt, kLogEps));
            if (pt > kLogEps) {
                const double g = -weight / (hw * pt);
                for (int k = 0; k < group_n; ++k) {
                    res.grad.at(row, col, group[k]) += g;
                }
            }
            // below the clamp the loss is locally constant: gradient 0
        }
    }
    res.loss = acc / hw;
    return res;
}

std::vector<double> gdsc_pool(const FeatureMap& features, const Mask& mask) {
    require(features.height == mask.height && features.width == mask.width,
            "gdsc_pool: shape mismatch");
    const int c = features.channels;
    std::vector<double> sum(c, 0.0);
    std::int64_t count = 0;
    for (int row = 0; row < mask.height; ++row) {
        for (int col = 0; col < mask.width; ++col) {
            if (!mask.at(row, col)) continue;
            ++count;
            for (int k = 0; k < c; ++k) sum[k] += features.at(row, col, k);
        }
    }
    if (count == 0) throw EmptyMaskError("gdsc_pool: mask has no set pixels");
    for (double& v : sum) v /= static_cast<double>(count);
    return sum;
}

ScoreMap gdsc_similarity(const std::vector<double>& f_q, const FeatureMap& features) {
    require(static_cast<int>(f_q.size()) == features.channels,
            "gdsc_similarity: channel mismatch");
    ScoreMap s(features.height, features.width);
    const int c = features.channels;
    for (int row = 0; row < features.height; ++row) {
        for (int col = 0; col < features.width; ++col) {
            double acc = 0.0;
            for (int k = 0; k < c; ++k) acc += f_q[k] * features.at(row, col, k);
            s.at(row, col) = sigmoid(acc);
        }
    }
    return s;
}

DiceLossResult gdsc_loss(const ScoreMap& s, const Mask& t) {
    require(s.height == t.height && s.width == t.width, "gdsc_loss: shape mismatch");
    double st = 0.0;
    double s_sum = 0.0;
    double t_sum = 0.0;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        s_sum += s.data[i];
        if (t.data[i]) {
            t_sum += 1.0;
            st += s.data[i];
        }
    }
    DiceLossResult res;
    res.grad = ScoreMap(s.height, s.width);
    const double denom = t_sum + s_sum;
    if (denom == 0.0) return res;  // vacuous: loss 0, zero gradient
    res.loss = 1.0 - 2.0 * st / denom;
    const double d2 = denom * denom;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        const double ti = t.data[i] ? 1.0 : 0.0;
        res.grad.data[i] = (2.0 * st - 2.0 * ti * denom) / d2;
    }
    return res;
}

SmoothL1Result smooth_l1(const std::vector<double>& pred, const std::vector<double>& target,
                         double beta) {
    require(pred.size() == target.size(), "smooth_l1: size mismatch");
    require(beta > 0.0, "smooth_l1: beta must be positive");
    SmoothL1Result res;
    res.grad.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        if (std::abs(d) < beta) {
            res.loss += 0.5 * d * d / beta;
            res.grad[i] = d / beta;
        } else {
            res.loss += std::abs(d) - 0.5 * beta;
            res.grad[i] = d > 0.0 ? 1.0 : -1.0;
        }
    }
    return res;
}

double total_loss(const LossParts& parts, const LossLambdas& l) {
    return parts.seg + l.lambda1 * parts.gdsc +
           l.lambda2 * (l.lambda3 * parts.rpn + l.lambda4 * parts.cls + parts.reg);
}

double finite_difference_check(const std::function<double(const std::vector<double>&)>& f,
                               const std::vector<double>& x0,
                               const std::vector<double>& analytic,
                               std::vector<std::size_t> coords, double h) {
    require(x0.size() == analytic.size(), "finite_difference_check: size mismatch");
    require(!x0.empty(), "finite_difference_check: empty input");
    if (coords.empty()) {
        const std::size_t n = x0.size();
        const std::size_t want = std::min<std::size_t>(10, n);
        for (std::size_t k = 0; k < want; ++k) {
            const std::size_t idx = want == 1 ? 0 : k * (n - 1) / (want - 1);
            if (coords.empty() || coords.back() != idx) coords.push_back(idx);
        }
    }
    std::vector<double> x = x0;
    double max_rel = 0.0;
    for (std::size_t idx : coords) {
        x[idx] = x0[idx] + h;
        const double fp = f(x);
        x[idx] = x0[idx] - h;
        const double fm = f(x);
        x[idx] = x0[idx];
        const double fd = (fp - fm) / (2.0 * h);
        const double rel = std::abs(fd - analytic[idx]) / std::max(std::abs(analytic[idx]), 1e-8);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace textkernel
