#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "inper/tensor.hpp"

namespace inper::enin {

/// Fraction of the feature map covered by one patch of the selection grid.
enum class PatchRatio { kQuarter, kEighth };
enum class PatchMode { kMax, kMin };

/// The two arms of the training-time intervention: kCross mixes in statistics
/// from a shuffled partner's maximum-entropy patch, kSelf reinforces the
/// sample with its own minimum-entropy patch.
enum class Branch { kCross, kSelf };

PatchRatio parse_patch_ratio(const std::string& s);  // "1/4" or "1/8"
std::string patch_ratio_name(PatchRatio r);

/// Normalized per-location prediction-entropy map of a feature batch.
/// map is [N,1,h,w] with entries in [0,1]; per sample the minimum is 0 and the
/// maximum 1 unless that sample's entropy map was constant (then all zeros).
struct EntropyMask {
    Tensor map;
    std::size_t source_h = 0, source_w = 0;  // feature map it was computed from
};

/// Resample the mask to a new spatial shape, keeping its provenance.
EntropyMask resize_mask(const EntropyMask& mask, std::size_t out_h, std::size_t out_w);

struct MixedStats {
    Tensor gamma;  // scale, strictly positive
    Tensor beta;   // shift
    double lambda_used = 1.0;
};

struct EnInConfig {
    double apply_probability = 0.5;
    double beta_alpha = 0.1;
    PatchRatio patch_ratio = PatchRatio::kQuarter;
    double eps = 1e-6;
    std::vector<int> insertion_points = {0, 1};  // block indices inside the net
};

/// Per-location class scores through the linear head, softmax, Shannon
/// entropy, then per-sample min-max normalization.
/// final_features: [N,C,h,w], classifier_weights: [C,K].
EntropyMask entropy_mask(const Tensor& final_features, const Tensor& classifier_weights);

struct PatchGrid {
    std::size_t rows = 0, cols = 0;
    std::size_t patch_h = 0, patch_w = 0;
};

/// Grid layout for a ratio on an h*w map. 1/4 splits 2x2; 1/8 splits the
/// longer side (width on ties) into 4 and the shorter into 2. Remainders are
/// truncated from the bottom/right. Throws ConfigError when a patch would be
/// smaller than 1x1.
PatchGrid patch_grid(std::size_t h, std::size_t w, PatchRatio ratio);

struct PatchSelection {
    Tensor features;  // [C,ph,pw]
    Tensor mask;      // [1,ph,pw]
    std::size_t row = 0, col = 0;  // grid cell
};

/// Pick the grid patch whose mean mask value is extreme (max or min); ties go
/// to the smallest (row, col) in row-major order.
/// mask: [1,h,w] or [h,w]; features: [C,h,w].
PatchSelection select_patch(const Tensor& mask, const Tensor& features, PatchRatio ratio,
                            PatchMode mode);

/// Channel mean and sqrt(variance + eps) of mask-weighted patch features;
/// the statistics run over the patch positions only.
InstanceStats masked_patch_stats(const Tensor& patch_features, const Tensor& patch_mask,
                                 double eps);

/// gamma = lambda*own.sigma + (1-lambda)*patch.sigma, beta likewise with mu.
MixedStats mix_stats(const InstanceStats& own, const InstanceStats& patch, double lambda);

/// One planned invocation of the intervention. All fields are constants with
/// respect to the backward pass; only the feature tensor the plan is applied
/// to carries gradient.
struct Application {
    bool applied = false;
    Branch branch = Branch::kSelf;
    double lambda = 1.0;
    std::vector<std::size_t> partner;  // shuffle permutation (cross branch)
    Tensor mu0, sigma0;                // [N,C] instance stats of the input
    Tensor gamma, beta;                // [N,C] mixed statistics
    Tensor mask;                       // [N,1,H,W] resized mask (cross branch term)
};

/// Draw the stochastic choices (apply?, lambda, shuffle, branch) and compute
/// the mixed statistics for this batch. The mask must already be resized to
/// the feature map's spatial shape.
Application plan(const Tensor& g, const EntropyMask& mask, const EnInConfig& cfg,
                 RngStream& rng);

/// Deterministic core of plan() with every choice pinned; used by tests and
/// by the gradient checker.
Application plan_forced(const Tensor& g, const EntropyMask& mask, const EnInConfig& cfg,
                        double lambda, std::vector<std::size_t> permutation, Branch branch);

/// out = mask .* g + gamma * (g - mu0) / sigma0 + beta   (cross branch)
/// out =           gamma * (g - mu0) / sigma0 + beta     (self branch)
/// Identity when the plan was not applied.
Tensor apply(const Tensor& g, const Application& app);

/// Gradient of apply() with the plan's statistics treated as constants.
Tensor backward(const Tensor& dout, const Application& app);

/// plan() followed by apply().
Tensor enin_transform(const Tensor& g, const EntropyMask& mask, const EnInConfig& cfg,
                      RngStream& rng);

}  // namespace inper::enin
