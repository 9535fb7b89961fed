#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "inper/errors.hpp"

namespace inper {

/// Dense row-major tensor of doubles, rank 1..4. The universal carrier for
/// images, feature maps, masks and statistics.
class Tensor {
  public:
    Tensor() = default;

    /// Validating constructor: extents positive, rank <= 4, data length equals
    /// the product of extents, every value finite.
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Rank-specific indexing; callers are expected to know the rank.
    double& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at3(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double at3(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double& at4(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    double at4(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Copy sample n of a rank-4 tensor into a rank-3 tensor [C,H,W].
Tensor slice_sample(const Tensor& t, std::size_t n);
/// Overwrite sample n of a rank-4 tensor from a rank-3 tensor of matching shape.
void set_sample(Tensor& t, std::size_t n, const Tensor& sample);

struct InstanceStats {
    Tensor mu;     // [N,C]
    Tensor sigma;  // [N,C], strictly positive
};

/// Per-sample per-channel spatial mean and sqrt(variance + eps) of an
/// [N,C,H,W] tensor. Population variance over the H*W positions.
InstanceStats instance_stats(const Tensor& t, double eps);

/// Softmax along the last axis, max-subtracted for stability.
Tensor softmax(const Tensor& v);
std::vector<double> softmax(std::span<const double> v);

/// Shannon entropy in nats; 0*log(0) counts as 0. Throws on negative entries.
double shannon_entropy(std::span<const double> p);

/// Affine map of all entries to [0,1]; a constant tensor maps to all zeros.
Tensor minmax_normalize(const Tensor& m);
void minmax_normalize_inplace(std::span<double> m);

/// Bilinear resampling of [N,C,h,w] to [N,C,out_h,out_w], align-corners-false
/// with edge clamping.
Tensor bilinear_resize(const Tensor& m, std::size_t out_h, std::size_t out_w);

std::vector<double> l2_normalize(std::span<const double> v);
double cosine_similarity(std::span<const double> a, std::span<const double> b);
/// Rank-1 convenience wrappers over the span versions.
Tensor l2_normalize(const Tensor& v);
double cosine_similarity(const Tensor& a, const Tensor& b);

/// Counter-based deterministic random stream (splitmix64). Identical seed and
/// call sequence give bit-identical outputs on any platform. Single-owner:
/// never share one stream across concurrent callers.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    /// Uniform double in [0,1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller.
    double normal();
    /// Unbiased uniform integer in [0,n).
    std::uint64_t uniform_below(std::uint64_t n);
    /// Gamma(alpha,1) via Marsaglia-Tsang, boosted for alpha < 1.
    double gamma(double alpha);

  private:
    std::uint64_t state_;
};

/// Derive an independent stream seed from a base seed and a role tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

/// Draw from the symmetric Beta(alpha, alpha), strictly inside (0,1).
double sample_beta(double alpha, RngStream& rng);

/// Uniform random permutation of {0..n-1} (Fisher-Yates); fixed points allowed.
std::vector<std::size_t> batch_permutation(std::size_t n, RngStream& rng);

}  // namespace inper
