#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "inper/tensor.hpp"

using namespace inper;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double lo = -2.0,
                     double hi = 2.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("tensor construction validates shape and payload") {
    CHECK_THROWS_AS(Tensor({2, 0}, {}), ShapeError);
    CHECK_THROWS_AS(Tensor({2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({1, 1, 1, 1, 1}), ShapeError);
    CHECK_THROWS_AS(Tensor({2}, {1.0, std::nan("")}), ValueError);
    CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<double>::infinity()}), ValueError);
    Tensor ok({2, 2}, {1, 2, 3, 4});
    CHECK(ok.numel() == 4);
}

TEST_CASE("instance_stats on constant and two-point channels") {
    Tensor t = Tensor::full({1, 1, 2, 2}, 5.0);
    auto s = instance_stats(t, 1e-6);
    CHECK(s.mu[0] == doctest::Approx(5.0));
    CHECK(s.sigma[0] == doctest::Approx(std::sqrt(1e-6)));

    Tensor u = Tensor::zeros({1, 1, 1, 2});
    u[0] = 1.0;
    u[1] = 3.0;
    auto s2 = instance_stats(u, 1e-12);
    CHECK(s2.mu[0] == doctest::Approx(2.0));
    CHECK(s2.sigma[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("instance_stats matches a scalar-loop oracle") {
    RngStream rng(101);
    Tensor t = random_tensor({2, 3, 4, 4}, rng);
    auto s = instance_stats(t, 1e-6);
    for (std::size_t n = 0; n < 2; ++n) {
        for (std::size_t c = 0; c < 3; ++c) {
            double sum = 0.0;
            for (std::size_t y = 0; y < 4; ++y)
                for (std::size_t x = 0; x < 4; ++x) sum += t.at4(n, c, y, x);
            double mean = sum / 16.0;
            double var = 0.0;
            for (std::size_t y = 0; y < 4; ++y)
                for (std::size_t x = 0; x < 4; ++x) {
                    double d = t.at4(n, c, y, x) - mean;
                    var += d * d;
                }
            var /= 16.0;
            CHECK(s.mu.at2(n, c) == doctest::Approx(mean).epsilon(1e-6));
            CHECK(s.sigma.at2(n, c) == doctest::Approx(std::sqrt(var + 1e-6)).epsilon(1e-6));
        }
    }
}

TEST_CASE("instance_stats affine covariance property") {
    // a*x+b maps mu -> a*mu+b and sigma -> |a|*sigma in the eps->0 limit.
    RngStream rng(7);
    Tensor t = random_tensor({2, 2, 3, 3}, rng);
    const double a = -1.7, b = 0.4;
    Tensor mapped = t;
    for (std::size_t i = 0; i < mapped.numel(); ++i) mapped[i] = a * mapped[i] + b;
    auto s0 = instance_stats(t, 1e-12);
    auto s1 = instance_stats(mapped, 1e-12);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(s1.mu[i] == doctest::Approx(a * s0.mu[i] + b).epsilon(1e-5));
        CHECK(s1.sigma[i] == doctest::Approx(std::abs(a) * s0.sigma[i]).epsilon(1e-5));
    }
}

TEST_CASE("instance_stats rejects bad arguments") {
    CHECK_THROWS_AS(instance_stats(Tensor::zeros({2, 2}), 1e-6), ShapeError);
    CHECK_THROWS_AS(instance_stats(Tensor::zeros({1, 1, 2, 2}), 0.0), ValueError);
}

TEST_CASE("softmax basics") {
    std::vector<double> z{0.0, 0.0, 0.0};
    auto p = softmax(std::span<const double>(z));
    for (double x : p) CHECK(x == doctest::Approx(1.0 / 3.0));

    std::vector<double> big{1000.0, 0.0};
    auto q = softmax(std::span<const double>(big));
    CHECK(q[0] == doctest::Approx(1.0));
    CHECK(q[1] == doctest::Approx(0.0));
    CHECK(std::isfinite(q[0]));

    std::vector<double> v{1.0, 2.0, 3.0};
    auto r = softmax(std::span<const double>(v));
    CHECK(r[0] == doctest::Approx(0.09003).epsilon(1e-3));
    CHECK(r[1] == doctest::Approx(0.24473).epsilon(1e-3));
    CHECK(r[2] == doctest::Approx(0.66524).epsilon(1e-3));
}

TEST_CASE("softmax is shift invariant and sums to one along the last axis") {
    RngStream rng(3);
    Tensor t = random_tensor({2, 3, 5}, rng);
    Tensor shifted = t;
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t k = 0; k < 5; ++k) shifted[r * 5 + k] += 0.37 * (double(r) + 1.0);
    Tensor a = softmax(t), b = softmax(shifted);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));
    }
    for (std::size_t r = 0; r < 6; ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < 5; ++k) s += a[r * 5 + k];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("shannon_entropy endpoints and oracle") {
    std::vector<double> onehot{1.0, 0.0, 0.0};
    CHECK(shannon_entropy(onehot) == doctest::Approx(0.0));
    std::vector<double> uni(4, 0.25);
    CHECK(shannon_entropy(uni) == doctest::Approx(std::log(4.0)).epsilon(1e-6));
    std::vector<double> p{0.7, 0.3};
    CHECK(shannon_entropy(p) == doctest::Approx(0.61086).epsilon(1e-3));
    std::vector<double> neg{1.2, -0.2};
    CHECK_THROWS_AS(shannon_entropy(neg), ValueError);
}

TEST_CASE("uniform distribution maximizes entropy over random grids") {
    RngStream rng(11);
    for (std::size_t k = 2; k <= 16; ++k) {
        std::vector<double> uni(k, 1.0 / double(k));
        const double hmax = shannon_entropy(uni);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> p(k);
            double s = 0.0;
            for (auto& x : p) {
                x = rng.uniform(0.0, 1.0);
                s += x;
            }
            for (auto& x : p) x /= s;
            CHECK(shannon_entropy(p) <= hmax + 1e-12);
        }
    }
}

TEST_CASE("minmax_normalize affine map and degenerate case") {
    Tensor t({3}, {2.0, 4.0, 6.0});
    Tensor n = minmax_normalize(t);
    CHECK(n[0] == doctest::Approx(0.0));
    CHECK(n[1] == doctest::Approx(0.5));
    CHECK(n[2] == doctest::Approx(1.0));

    Tensor c = Tensor::full({3}, 5.0);
    Tensor nc = minmax_normalize(c);
    for (std::size_t i = 0; i < 3; ++i) CHECK(nc[i] == 0.0);
}

TEST_CASE("minmax_normalize is idempotent") {
    RngStream rng(5);
    Tensor t = random_tensor({8}, rng);
    Tensor a = minmax_normalize(t);
    Tensor b = minmax_normalize(a);
    for (std::size_t i = 0; i < 8; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("bilinear_resize constant, identity, and oracle") {
    Tensor one = Tensor::full({1, 1, 1, 1}, 0.7);
    Tensor big = bilinear_resize(one, 5, 3);
    for (std::size_t i = 0; i < big.numel(); ++i) CHECK(big[i] == doctest::Approx(0.7));

    RngStream rng(9);
    Tensor t = random_tensor({1, 1, 4, 6}, rng);
    Tensor same = bilinear_resize(t, 4, 6);
    for (std::size_t i = 0; i < t.numel(); ++i) CHECK(same[i] == doctest::Approx(t[i]));

    Tensor m({1, 1, 2, 2}, {0.0, 1.0, 1.0, 0.0});
    Tensor r = bilinear_resize(m, 4, 4);
    // Hand-rolled align-corners-false sample at each output cell.
    auto oracle = [&](std::size_t oy, std::size_t ox) {
        double fy = std::clamp((double(oy) + 0.5) * 0.5 - 0.5, 0.0, 1.0);
        double fx = std::clamp((double(ox) + 0.5) * 0.5 - 0.5, 0.0, 1.0);
        std::size_t y0 = std::size_t(fy), x0 = std::size_t(fx);
        std::size_t y1 = std::min<std::size_t>(y0 + 1, 1), x1 = std::min<std::size_t>(x0 + 1, 1);
        double wy = fy - double(y0), wx = fx - double(x0);
        double top = m.at4(0, 0, y0, x0) * (1 - wx) + m.at4(0, 0, y0, x1) * wx;
        double bot = m.at4(0, 0, y1, x0) * (1 - wx) + m.at4(0, 0, y1, x1) * wx;
        return top * (1 - wy) + bot * wy;
    };
    for (std::size_t oy = 0; oy < 4; ++oy)
        for (std::size_t ox = 0; ox < 4; ++ox)
            CHECK(r.at4(0, 0, oy, ox) == doctest::Approx(oracle(oy, ox)).epsilon(1e-6));

    CHECK_THROWS_AS(bilinear_resize(t, 0, 3), ShapeError);
}

TEST_CASE("bilinear_resize stays within the input range") {
    RngStream rng(21);
    Tensor t = random_tensor({2, 1, 3, 5}, rng, 0.0, 1.0);
    Tensor r = bilinear_resize(t, 9, 7);
    auto [lo, hi] = std::minmax_element(t.data(), t.data() + t.numel());
    for (std::size_t i = 0; i < r.numel(); ++i) {
        CHECK(r[i] >= *lo - 1e-12);
        CHECK(r[i] <= *hi + 1e-12);
    }
}

TEST_CASE("sample_beta distribution checks") {
    const int draws = 100000;
    SUBCASE("alpha=1 is uniform (Kolmogorov-Smirnov)") {
        RngStream rng(1234);
        std::vector<double> xs(draws);
        for (auto& x : xs) x = sample_beta(1.0, rng);
        std::sort(xs.begin(), xs.end());
        double ks = 0.0;
        for (int i = 0; i < draws; ++i) {
            double ecdf_hi = double(i + 1) / draws, ecdf_lo = double(i) / draws;
            ks = std::max(ks, std::max(std::abs(ecdf_hi - xs[i]), std::abs(xs[i] - ecdf_lo)));
        }
        CHECK(ks < 0.01);
    }
    SUBCASE("symmetric mean 0.5") {
        for (double alpha : {0.1, 0.5, 2.0}) {
            RngStream rng(99);
            double sum = 0.0;
            for (int i = 0; i < draws; ++i) sum += sample_beta(alpha, rng);
            CHECK(sum / draws == doctest::Approx(0.5).epsilon(0.02));
        }
    }
    SUBCASE("alpha=0.1 variance matches the closed form") {
        RngStream rng(4321);
        double s = 0.0, ss = 0.0;
        for (int i = 0; i < draws; ++i) {
            double x = sample_beta(0.1, rng);
            CHECK(x > 0.0);
            CHECK(x < 1.0);
            s += x;
            ss += x * x;
        }
        double mean = s / draws;
        double var = ss / draws - mean * mean;
        CHECK(var == doctest::Approx(0.2083).epsilon(0.05));
        CHECK(std::abs(var - 0.2083) < 0.01);
    }
    SUBCASE("invalid alpha") {
        RngStream rng(1);
        CHECK_THROWS_AS(sample_beta(0.0, rng), ValueError);
        CHECK_THROWS_AS(sample_beta(-1.0, rng), ValueError);
    }
}

TEST_CASE("batch_permutation basics") {
    RngStream rng(77);
    auto p1 = batch_permutation(1, rng);
    CHECK(p1 == std::vector<std::size_t>{0});

    auto p = batch_permutation(17, rng);
    auto sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 17; ++i) CHECK(sorted[i] == i);

    RngStream a(42), b(42);
    CHECK(batch_permutation(4, a) == batch_permutation(4, b));
}

TEST_CASE("batch_permutation is uniform over S_3") {
    RngStream rng(2024);
    std::map<std::vector<std::size_t>, int> counts;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) counts[batch_permutation(3, rng)]++;
    CHECK(counts.size() == 6);
    for (const auto& [perm, n] : counts) {
        CHECK(std::abs(double(n) / trials - 1.0 / 6.0) < 0.02);
    }
}

TEST_CASE("l2_normalize and cosine_similarity") {
    std::vector<double> v{3.0, 4.0};
    auto u = l2_normalize(v);
    CHECK(u[0] == doctest::Approx(0.6));
    CHECK(u[1] == doctest::Approx(0.8));

    std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0};
    CHECK(cosine_similarity(e1, e2) == doctest::Approx(0.0));
    CHECK(cosine_similarity(e1, e1) == doctest::Approx(1.0));

    RngStream rng(8);
    std::vector<double> a(6), b(6);
    for (auto& x : a) x = rng.uniform(-1, 1);
    for (auto& x : b) x = rng.uniform(-1, 1);
    double dot = 0, na = 0, nb = 0;
    for (int i = 0; i < 6; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    CHECK(cosine_similarity(a, b) ==
          doctest::Approx(dot / (std::sqrt(na) * std::sqrt(nb))).epsilon(1e-6));

    std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(l2_normalize(zero), ZeroNormError);
    CHECK_THROWS_AS(cosine_similarity(zero, e1), ZeroNormError);
}

TEST_CASE("rng streams are reproducible and seed-sensitive") {
    RngStream a(5), b(5), c(6);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    bool differs = false;
    RngStream a2(5);
    for (int i = 0; i < 10; ++i) differs |= (a2.next_u64() != c.next_u64());
    CHECK(differs);
}
