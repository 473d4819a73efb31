#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "textkernel/labelgen.hpp"
#include "textkernel/raster.hpp"

namespace textkernel {

// Per-class weights, indexed by class id. Length 3 ([non-text, kernel,
// border]) or 2 ([background, kernel] after folding).
using ClassWeights = std::vector<double>;

struct ClassCounts {
    std::int64_t non_text = 0;
    std::int64_t kernel = 0;
    std::int64_t border = 0;
};

ClassCounts count_classes(const ClassMask& y);

// Stable per-pixel softmax (max subtraction), channel-last.
ProbMap softmax(const ProbMap& logits);

// Class-balance weights per supervision mode: mode 1 -> ones; mode 2 ->
// [1, (N_nt + N_tb) / N_tk]; modes 3..5 -> [1, N_nt/N_tk, N_nt/N_tb]. A zero
// denominator with a nonzero numerator is an error; an image with no
// foreground at all yields all-ones.
ClassWeights class_weights(SupervisionMode mode, const ClassCounts& counts);

struct SegLossResult {
    double loss = 0.0;
    ProbMap grad;  // dL/dp, same shape as p
};

// Weighted cross entropy, L = (1/HW) sum w_ij * CE(p_ij, y_ij) with
// w_ij = W[y_ij] (or W[folded target] for length-2 weights). Mode selects the
// channel folding: modes 1-3 fold to kernel vs rest, mode 5 folds to text
// (kernel+border) vs non-text, mode 4 is the full three-class CE. Folding
// adds probabilities before the log. Ignored pixels get weight 0; the
// normalizer stays HW. Probabilities are clamped at 1e-12 before the log, and
// the gradient is the exact derivative of the clamped loss (zero where the
// clamp is active).
SegLossResult seg_loss(const ProbMap& p, const ClassMask& y, const ClassWeights& w,
                       const Mask* ignore = nullptr,
                       SupervisionMode mode = SupervisionMode::kKernelBorderWkbn);

// Mean feature vector over the mask's set pixels. Empty mask is an error
// (callers skip textless images instead).
std::vector<double> gdsc_pool(const FeatureMap& features, const Mask& mask);

// S(x, y) = sigmoid(dot(f_q, F(x, y))).
ScoreMap gdsc_similarity(const std::vector<double>& f_q, const FeatureMap& features);

struct DiceLossResult {
    double loss = 0.0;
    ScoreMap grad;  // dL/dS
};

// Dice loss L = 1 - 2*sum(T*S) / (sum(T) + sum(S)) with its analytic
// gradient. sum(T) + sum(S) == 0 is defined as loss 0 (vacuous).
DiceLossResult gdsc_loss(const ScoreMap& s, const Mask& t);

struct SmoothL1Result {
    double loss = 0.0;
    std::vector<double> grad;  // dL/dpred
};

// Elementwise 0.5*d^2/beta for |d| < beta else |d| - 0.5*beta, summed.
SmoothL1Result smooth_l1(const std::vector<double>& pred, const std::vector<double>& target,
                         double beta = 1.0);

struct LossParts {
    double seg = 0.0;
    double gdsc = 0.0;
    double rpn = 0.0;
    double cls = 0.0;
    double reg = 0.0;
};

struct LossLambdas {
    double lambda1 = 3.0;
    double lambda2 = 1.0;
    double lambda3 = 1.0;
    double lambda4 = 1.0;
};

// L = L_seg + l1*L_gdsc + l2*(l3*L_rpn + l4*L_cls + L_reg).
double total_loss(const LossParts& parts, const LossLambdas& lambdas = {});

// Central-difference check of `analytic` against f around x0 at the given
// coordinates (>= 10 spread deterministically over the raster when empty).
// Returns the max relative error, denominator max(|analytic|, 1e-8).
double finite_difference_check(const std::function<double(const std::vector<double>&)>& f,
                               const std::vector<double>& x0, const std::vector<double>& analytic,
                               std::vector<std::size_t> coords = {}, double h = 1e-5);

}  // namespace textkernel
