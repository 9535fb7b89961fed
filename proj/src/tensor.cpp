#include "inper/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace inper {

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    if (shape.empty() || shape.size() > 4) {
        throw ShapeError("tensor rank must be 1..4, got " + std::to_string(shape.size()));
    }
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) {
            throw ShapeError("tensor extents must be positive");
        }
        n *= e;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    std::size_t n = checked_numel(shape_);
    if (n != data_.size()) {
        throw ShapeError("data length " + std::to_string(data_.size()) +
                         " does not match shape product " + std::to_string(n));
    }
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw ValueError("tensor values must be finite");
        }
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = checked_numel(shape);
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.assign(n, 0.0);
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor slice_sample(const Tensor& t, std::size_t n) {
    if (t.rank() != 4) {
        throw ShapeError("slice_sample expects a rank-4 tensor");
    }
    if (n >= t.extent(0)) {
        throw ShapeError("sample index out of range");
    }
    const std::size_t chw = t.extent(1) * t.extent(2) * t.extent(3);
    Tensor out = Tensor::zeros({t.extent(1), t.extent(2), t.extent(3)});
    std::copy_n(t.data() + n * chw, chw, out.data());
    return out;
}

void set_sample(Tensor& t, std::size_t n, const Tensor& sample) {
    if (t.rank() != 4 || sample.rank() != 3) {
        throw ShapeError("set_sample expects rank-4 destination and rank-3 source");
    }
    const std::size_t chw = t.extent(1) * t.extent(2) * t.extent(3);
    if (sample.numel() != chw || n >= t.extent(0)) {
        throw ShapeError("set_sample shape mismatch");
    }
    std::copy_n(sample.data(), chw, t.data() + n * chw);
}

InstanceStats instance_stats(const Tensor& t, double eps) {
    if (t.rank() != 4) {
        throw ShapeError("instance_stats expects [N,C,H,W]");
    }
    if (!(eps > 0.0)) {
        throw ValueError("instance_stats eps must be positive");
    }
    const std::size_t n = t.extent(0), c = t.extent(1);
    const std::size_t hw = t.extent(2) * t.extent(3);
    InstanceStats s{Tensor::zeros({n, c}), Tensor::zeros({n, c})};
    const double* p = t.data();
    for (std::size_t i = 0; i < n * c; ++i) {
        const double* plane = p + i * hw;
        double sum = 0.0;
        for (std::size_t j = 0; j < hw; ++j) sum += plane[j];
        const double mean = sum / static_cast<double>(hw);
        double var = 0.0;
        for (std::size_t j = 0; j < hw; ++j) {
            const double d = plane[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(hw);
        s.mu[i] = mean;
        s.sigma[i] = std::sqrt(var + eps);
    }
    return s;
}

std::vector<double> softmax(std::span<const double> v) {
    std::vector<double> out(v.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

Tensor softmax(const Tensor& v) {
    const std::size_t k = v.extent(v.rank() - 1);
    const std::size_t rows = v.numel() / k;
    Tensor out = Tensor::zeros(v.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        std::span<const double> row(v.data() + r * k, k);
        std::vector<double> s = softmax(row);
        std::copy(s.begin(), s.end(), out.data() + r * k);
    }
    return out;
}

double shannon_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double x : p) {
        if (x < 0.0) {
            throw ValueError("probabilities must be nonnegative");
        }
        if (x > 0.0) {
            h -= x * std::log(x);
        }
    }
    return std::max(h, 0.0);
}

void minmax_normalize_inplace(std::span<double> m) {
    if (m.empty()) return;
    auto [lo_it, hi_it] = std::minmax_element(m.begin(), m.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi > lo) {
        const double inv = 1.0 / (hi - lo);
        for (double& x : m) x = (x - lo) * inv;
    } else {
        // Constant input carries no localization signal: neutral all-zero map.
        for (double& x : m) x = 0.0;
    }
}

Tensor minmax_normalize(const Tensor& m) {
    Tensor out = m;
    minmax_normalize_inplace(std::span<double>(out.data(), out.numel()));
    return out;
}

Tensor bilinear_resize(const Tensor& m, std::size_t out_h, std::size_t out_w) {
    if (m.rank() != 4) {
        throw ShapeError("bilinear_resize expects [N,C,h,w]");
    }
    if (out_h == 0 || out_w == 0) {
        throw ShapeError("bilinear_resize target extents must be positive");
    }
    const std::size_t n = m.extent(0), c = m.extent(1);
    const std::size_t h = m.extent(2), w = m.extent(3);
    Tensor out = Tensor::zeros({n, c, out_h, out_w});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        const double* src = m.data() + plane * h * w;
        double* dst = out.data() + plane * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
            fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
            const std::size_t y0 = static_cast<std::size_t>(fy);
            const std::size_t y1 = std::min(y0 + 1, h - 1);
            const double wy = fy - static_cast<double>(y0);
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
                fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
                const std::size_t x0 = static_cast<std::size_t>(fx);
                const std::size_t x1 = std::min(x0 + 1, w - 1);
                const double wx = fx - static_cast<double>(x0);
                const double top = src[y0 * w + x0] * (1.0 - wx) + src[y0 * w + x1] * wx;
                const double bot = src[y1 * w + x0] * (1.0 - wx) + src[y1 * w + x1] * wx;
                dst[oy * out_w + ox] = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

std::vector<double> l2_normalize(std::span<const double> v) {
    double ss = 0.0;
    for (double x : v) ss += x * x;
    if (ss == 0.0) {
        throw ZeroNormError("cannot normalize a zero vector");
    }
    const double inv = 1.0 / std::sqrt(ss);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("cosine_similarity length mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw ZeroNormError("cosine_similarity of a zero vector");
    }
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

Tensor l2_normalize(const Tensor& v) {
    if (v.rank() != 1) {
        throw ShapeError("l2_normalize tensor overload expects rank 1");
    }
    return Tensor(v.shape(), l2_normalize(std::span<const double>(v.data(), v.numel())));
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
    return cosine_similarity(std::span<const double>(a.data(), a.numel()),
                             std::span<const double>(b.data(), b.numel()));
}

std::uint64_t RngStream::next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() {
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t RngStream::uniform_below(std::uint64_t n) {
    if (n == 0) {
        throw ValueError("uniform_below(0)");
    }
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

double RngStream::gamma(double alpha) {
    if (!(alpha > 0.0)) {
        throw ValueError("gamma shape must be positive");
    }
    if (alpha < 1.0) {
        const double u = std::max(uniform(), 1e-300);
        return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    RngStream s(seed ^ (tag * 0xD1342543DE82EF95ULL));
    return s.next_u64();
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return derive_seed(seed, h);
}

double sample_beta(double alpha, RngStream& rng) {
    if (!(alpha > 0.0)) {
        throw ValueError("beta shape must be positive");
    }
    for (;;) {
        const double a = rng.gamma(alpha);
        const double b = rng.gamma(alpha);
        if (a + b > 0.0) {
            const double x = a / (a + b);
            if (x > 0.0 && x < 1.0) return x;
        }
    }
}

std::vector<std::size_t> batch_permutation(std::size_t n, RngStream& rng) {
    if (n == 0) {
        throw ValueError("batch_permutation needs n >= 1");
    }
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = rng.uniform_below(i + 1);
        std::swap(p[i], p[j]);
    }
    return p;
}

}  // namespace inper
