#include "inper/enin.hpp"

#include <cmath>
#include <utility>

namespace inper::enin {

PatchRatio parse_patch_ratio(const std::string& s) {
    if (s == "1/4") return PatchRatio::kQuarter;
    if (s == "1/8") return PatchRatio::kEighth;
    throw ValueError("patch ratio must be \"1/4\" or \"1/8\", got \"" + s + "\"");
}

std::string patch_ratio_name(PatchRatio r) {
    return r == PatchRatio::kQuarter ? "1/4" : "1/8";
}

EntropyMask resize_mask(const EntropyMask& mask, std::size_t out_h, std::size_t out_w) {
    EntropyMask out;
    out.map = bilinear_resize(mask.map, out_h, out_w);
    out.source_h = mask.source_h;
    out.source_w = mask.source_w;
    return out;
}

EntropyMask entropy_mask(const Tensor& final_features, const Tensor& classifier_weights) {
    if (final_features.rank() != 4) {
        throw ShapeError("entropy_mask expects features [N,C,h,w]");
    }
    if (classifier_weights.rank() != 2 ||
        classifier_weights.extent(0) != final_features.extent(1)) {
        throw ShapeError("classifier weights must be [C,K] with C matching the features");
    }
    const std::size_t n = final_features.extent(0), c = final_features.extent(1);
    const std::size_t h = final_features.extent(2), w = final_features.extent(3);
    const std::size_t k = classifier_weights.extent(1);
    const std::size_t hw = h * w;

    EntropyMask out;
    out.map = Tensor::zeros({n, 1, h, w});
    out.source_h = h;
    out.source_w = w;

    std::vector<double> scores(k);
    for (std::size_t s = 0; s < n; ++s) {
        double* entropies = out.map.data() + s * hw;
        for (std::size_t loc = 0; loc < hw; ++loc) {
            for (std::size_t j = 0; j < k; ++j) {
                double acc = 0.0;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    acc += classifier_weights.at2(ch, j) *
                           final_features[(s * c + ch) * hw + loc];
                }
                scores[j] = acc;
            }
            entropies[loc] = shannon_entropy(softmax(std::span<const double>(scores)));
        }
        minmax_normalize_inplace(std::span<double>(entropies, hw));
    }
    return out;
}

PatchGrid patch_grid(std::size_t h, std::size_t w, PatchRatio ratio) {
    PatchGrid g;
    if (ratio == PatchRatio::kQuarter) {
        g.rows = 2;
        g.cols = 2;
    } else if (h > w) {
        g.rows = 4;
        g.cols = 2;
    } else {
        g.rows = 2;
        g.cols = 4;
    }
    g.patch_h = h / g.rows;
    g.patch_w = w / g.cols;
    if (g.patch_h == 0 || g.patch_w == 0) {
        throw ConfigError("patch grid " + std::to_string(g.rows) + "x" + std::to_string(g.cols) +
                          " does not fit a " + std::to_string(h) + "x" + std::to_string(w) +
                          " map");
    }
    return g;
}

namespace {

const double* mask_plane(const Tensor& mask, std::size_t h, std::size_t w) {
    const bool ok = (mask.rank() == 2 && mask.extent(0) == h && mask.extent(1) == w) ||
                    (mask.rank() == 3 && mask.extent(0) == 1 && mask.extent(1) == h &&
                     mask.extent(2) == w);
    if (!ok) {
        throw ShapeError("mask spatial shape does not match the feature map");
    }
    return mask.data();
}

}  // namespace

PatchSelection select_patch(const Tensor& mask, const Tensor& features, PatchRatio ratio,
                            PatchMode mode) {
    if (features.rank() != 3) {
        throw ShapeError("select_patch expects features [C,h,w]");
    }
    const std::size_t c = features.extent(0), h = features.extent(1), w = features.extent(2);
    const double* m = mask_plane(mask, h, w);
    const PatchGrid grid = patch_grid(h, w, ratio);

    double best = 0.0;
    std::size_t best_r = 0, best_c = 0;
    bool first = true;
    for (std::size_t r = 0; r < grid.rows; ++r) {
        for (std::size_t col = 0; col < grid.cols; ++col) {
            double sum = 0.0;
            for (std::size_t y = r * grid.patch_h; y < (r + 1) * grid.patch_h; ++y) {
                for (std::size_t x = col * grid.patch_w; x < (col + 1) * grid.patch_w; ++x) {
                    sum += m[y * w + x];
                }
            }
            const double score = sum / double(grid.patch_h * grid.patch_w);
            const bool better = mode == PatchMode::kMax ? score > best : score < best;
            if (first || better) {
                best = score;
                best_r = r;
                best_c = col;
                first = false;
            }
        }
    }

    PatchSelection sel;
    sel.row = best_r;
    sel.col = best_c;
    sel.features = Tensor::zeros({c, grid.patch_h, grid.patch_w});
    sel.mask = Tensor::zeros({1, grid.patch_h, grid.patch_w});
    const std::size_t y0 = best_r * grid.patch_h, x0 = best_c * grid.patch_w;
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < grid.patch_h; ++y) {
            for (std::size_t x = 0; x < grid.patch_w; ++x) {
                sel.features.at3(ch, y, x) = features.at3(ch, y0 + y, x0 + x);
            }
        }
    }
    for (std::size_t y = 0; y < grid.patch_h; ++y) {
        for (std::size_t x = 0; x < grid.patch_w; ++x) {
            sel.mask.at3(0, y, x) = m[(y0 + y) * w + x0 + x];
        }
    }
    return sel;
}

InstanceStats masked_patch_stats(const Tensor& patch_features, const Tensor& patch_mask,
                                 double eps) {
    if (patch_features.rank() != 3) {
        throw ShapeError("masked_patch_stats expects features [C,ph,pw]");
    }
    const std::size_t c = patch_features.extent(0);
    const std::size_t hw = patch_features.extent(1) * patch_features.extent(2);
    const double* m = mask_plane(patch_mask, patch_features.extent(1), patch_features.extent(2));

    InstanceStats s{Tensor::zeros({c}), Tensor::zeros({c})};
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* f = patch_features.data() + ch * hw;
        double sum = 0.0;
        for (std::size_t i = 0; i < hw; ++i) sum += m[i] * f[i];
        const double mean = sum / double(hw);
        double var = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
            const double d = m[i] * f[i] - mean;
            var += d * d;
        }
        var /= double(hw);
        s.mu[ch] = mean;
        s.sigma[ch] = std::sqrt(var + eps);
    }
    return s;
}

MixedStats mix_stats(const InstanceStats& own, const InstanceStats& patch, double lambda) {
    if (!own.mu.same_shape(patch.mu) || !own.sigma.same_shape(patch.sigma)) {
        throw ShapeError("mix_stats shape mismatch");
    }
    if (lambda < 0.0 || lambda > 1.0) {
        throw ValueError("mix lambda must lie in [0,1]");
    }
    MixedStats out;
    out.lambda_used = lambda;
    out.gamma = Tensor::zeros(own.sigma.shape());
    out.beta = Tensor::zeros(own.mu.shape());
    for (std::size_t i = 0; i < out.gamma.numel(); ++i) {
        out.gamma[i] = lambda * own.sigma[i] + (1.0 - lambda) * patch.sigma[i];
        out.beta[i] = lambda * own.mu[i] + (1.0 - lambda) * patch.mu[i];
    }
    return out;
}

namespace {

void check_mask_matches(const Tensor& g, const EntropyMask& mask) {
    if (mask.map.rank() != 4 || mask.map.extent(0) != g.extent(0) ||
        mask.map.extent(1) != 1 || mask.map.extent(2) != g.extent(2) ||
        mask.map.extent(3) != g.extent(3)) {
        throw ShapeError("entropy mask spatial shape does not match the feature batch");
    }
}

}  // namespace

Application plan_forced(const Tensor& g, const EntropyMask& mask, const EnInConfig& cfg,
                        double lambda, std::vector<std::size_t> permutation, Branch branch) {
    if (g.rank() != 4) {
        throw ShapeError("enin expects a feature batch [N,C,H,W]");
    }
    check_mask_matches(g, mask);
    const std::size_t n = g.extent(0), c = g.extent(1);
    if (permutation.size() != n) {
        throw ShapeError("permutation length must equal the batch size");
    }

    Application app;
    app.applied = true;
    app.branch = branch;
    app.lambda = lambda;
    app.partner = std::move(permutation);

    const InstanceStats own = instance_stats(g, cfg.eps);
    app.mu0 = own.mu;
    app.sigma0 = own.sigma;

    // Per-sample patch statistics of the donor: the shuffled partner's
    // max-entropy patch (cross) or the sample's own min-entropy patch (self).
    Tensor patch_mu = Tensor::zeros({n, c});
    Tensor patch_sigma = Tensor::zeros({n, c});
    const std::size_t hw = g.extent(2) * g.extent(3);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t donor = branch == Branch::kCross ? app.partner[s] : s;
        const Tensor donor_features = slice_sample(g, donor);
        Tensor donor_mask = Tensor::zeros({1, g.extent(2), g.extent(3)});
        std::copy_n(mask.map.data() + donor * hw, hw, donor_mask.data());
        const PatchMode mode = branch == Branch::kCross ? PatchMode::kMax : PatchMode::kMin;
        const PatchSelection sel = select_patch(donor_mask, donor_features, cfg.patch_ratio, mode);
        const InstanceStats ps = masked_patch_stats(sel.features, sel.mask, cfg.eps);
        for (std::size_t ch = 0; ch < c; ++ch) {
            patch_mu.at2(s, ch) = ps.mu[ch];
            patch_sigma.at2(s, ch) = ps.sigma[ch];
        }
    }
    const MixedStats mixed =
        mix_stats(own, InstanceStats{std::move(patch_mu), std::move(patch_sigma)}, lambda);
    app.gamma = mixed.gamma;
    app.beta = mixed.beta;
    if (branch == Branch::kCross) {
        app.mask = mask.map;
    }
    return app;
}

Application plan(const Tensor& g, const EntropyMask& mask, const EnInConfig& cfg,
                 RngStream& rng) {
    if (g.rank() != 4) {
        throw ShapeError("enin expects a feature batch [N,C,H,W]");
    }
    check_mask_matches(g, mask);
    // Draw order is part of the contract: apply gate, lambda, shuffle, branch.
    if (rng.uniform() >= cfg.apply_probability) {
        return Application{};
    }
    const double lambda = sample_beta(cfg.beta_alpha, rng);
    std::vector<std::size_t> perm = batch_permutation(g.extent(0), rng);
    const Branch branch = rng.uniform() < 0.5 ? Branch::kCross : Branch::kSelf;
    return plan_forced(g, mask, cfg, lambda, std::move(perm), branch);
}

Tensor apply(const Tensor& g, const Application& app) {
    if (!app.applied) {
        return g;
    }
    const std::size_t n = g.extent(0), c = g.extent(1);
    const std::size_t hw = g.extent(2) * g.extent(3);
    if (app.mu0.rank() != 2 || app.mu0.extent(0) != n || app.mu0.extent(1) != c) {
        throw ShapeError("application does not match the feature batch");
    }
    Tensor out = Tensor::zeros(g.shape());
    const bool cross = app.branch == Branch::kCross;
    for (std::size_t s = 0; s < n; ++s) {
        const double* m = cross ? app.mask.data() + s * hw : nullptr;
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double mu = app.mu0.at2(s, ch);
            const double scale = app.gamma.at2(s, ch) / app.sigma0.at2(s, ch);
            const double beta = app.beta.at2(s, ch);
            const double* src = g.data() + (s * c + ch) * hw;
            double* dst = out.data() + (s * c + ch) * hw;
            if (cross) {
                for (std::size_t i = 0; i < hw; ++i) {
                    dst[i] = m[i] * src[i] + scale * (src[i] - mu) + beta;
                }
            } else {
                for (std::size_t i = 0; i < hw; ++i) {
                    dst[i] = scale * (src[i] - mu) + beta;
                }
            }
        }
    }
    return out;
}

Tensor backward(const Tensor& dout, const Application& app) {
    if (!app.applied) {
        return dout;
    }
    const std::size_t n = dout.extent(0), c = dout.extent(1);
    const std::size_t hw = dout.extent(2) * dout.extent(3);
    Tensor din = Tensor::zeros(dout.shape());
    const bool cross = app.branch == Branch::kCross;
    for (std::size_t s = 0; s < n; ++s) {
        const double* m = cross ? app.mask.data() + s * hw : nullptr;
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double scale = app.gamma.at2(s, ch) / app.sigma0.at2(s, ch);
            const double* src = dout.data() + (s * c + ch) * hw;
            double* dst = din.data() + (s * c + ch) * hw;
            if (cross) {
                for (std::size_t i = 0; i < hw; ++i) {
                    dst[i] = src[i] * (m[i] + scale);
                }
            } else {
                for (std::size_t i = 0; i < hw; ++i) {
                    dst[i] = src[i] * scale;
                }
            }
        }
    }
    return din;
}

Tensor enin_transform(const Tensor& g, const EntropyMask& mask, const EnInConfig& cfg,
                      RngStream& rng) {
    return apply(g, plan(g, mask, cfg, rng));
}

}  // namespace inper::enin
