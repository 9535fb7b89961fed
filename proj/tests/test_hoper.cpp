#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "inper/hoper.hpp"
#include "inper/nnet.hpp"

using namespace inper;
using namespace inper::hoper;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double lo = -2.0,
                     double hi = 2.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

Tensor unit_vec(std::vector<double> v) { return l2_normalize(Tensor({v.size()}, v)); }

}  // namespace

TEST_CASE("config entropy threshold resolution and cp-lambda parsing") {
    HoPerConfig cfg;
    CHECK(cfg.resolved_entropy_threshold(4) == doctest::Approx(0.4 * std::log(4.0)));
    cfg.entropy_threshold = 0.3;
    CHECK(cfg.resolved_entropy_threshold(4) == 0.3);

    HoPerConfig parsed;
    set_cp_lambda(parsed, "fixed:0.7");
    CHECK(parsed.cp_lambda_mode == CpLambdaMode::kFixed);
    CHECK(parsed.cp_lambda == doctest::Approx(0.7));
    set_cp_lambda(parsed, "beta");
    CHECK(parsed.cp_lambda_mode == CpLambdaMode::kBeta);
    set_cp_lambda(parsed, "beta:0.3");
    CHECK(parsed.cp_beta_alpha == doctest::Approx(0.3));
    CHECK_THROWS_AS(set_cp_lambda(parsed, "sometimes"), ConfigError);
    CHECK_THROWS_AS(set_cp_lambda(parsed, "fixed:1.5"), ConfigError);
    CHECK_THROWS_AS(set_cp_lambda(parsed, "beta:-1"), ConfigError);
}

TEST_CASE("causal_perturb with lambda 1 is the renormalization identity") {
    RngStream rng(21);
    Tensor f = random_tensor({3, 4, 4}, rng);
    Tensor mask = random_tensor({1, 4, 4}, rng, 0.0, 1.0);
    HoPerConfig cfg;
    cfg.cp_lambda = 1.0;
    Tensor out = causal_perturb(f, mask, cfg, rng);
    for (std::size_t i = 0; i < f.numel(); ++i) {
        CHECK(out[i] == doctest::Approx(f[i]).epsilon(1e-5));
    }
}

TEST_CASE("causal_perturb of a constant map matches the scalar oracle") {
    // Mask minimum sits in the top-left quadrant; features are constant per
    // channel so the output must be the mixed shift, constant per channel.
    Tensor mask = Tensor::full({1, 4, 4}, 0.8);
    double patch_sum = 0.0;
    for (std::size_t y = 0; y < 2; ++y) {
        for (std::size_t x = 0; x < 2; ++x) {
            mask.at3(0, y, x) = 0.1 * double(y * 2 + x + 1);
            patch_sum += mask.at3(0, y, x);
        }
    }
    const double mbar = patch_sum / 4.0;

    Tensor f = Tensor::zeros({2, 4, 4});
    const double c0 = 3.0, c1 = -1.5;
    for (std::size_t i = 0; i < 16; ++i) {
        f[i] = c0;
        f[16 + i] = c1;
    }
    HoPerConfig cfg;  // fixed lambda 0.5
    RngStream rng(1);
    Tensor out = causal_perturb(f, mask, cfg, rng);
    const double e0 = 0.5 * c0 + 0.5 * (c0 * mbar);
    const double e1 = 0.5 * c1 + 0.5 * (c1 * mbar);
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(out[i] == doctest::Approx(e0).epsilon(1e-9));
        CHECK(out[16 + i] == doctest::Approx(e1).epsilon(1e-9));
    }
}

TEST_CASE("causal_perturb is bit-reproducible under a fixed seed") {
    RngStream data_rng(33);
    Tensor f = random_tensor({4, 4, 4}, data_rng);
    Tensor mask = random_tensor({1, 4, 4}, data_rng, 0.0, 1.0);
    HoPerConfig cfg;
    cfg.cp_lambda_mode = CpLambdaMode::kBeta;
    RngStream a(555), b(555);
    Tensor oa = causal_perturb(f, mask, cfg, a);
    Tensor ob = causal_perturb(f, mask, cfg, b);
    for (std::size_t i = 0; i < oa.numel(); ++i) CHECK(oa[i] == ob[i]);
    CHECK_THROWS_AS(causal_perturb(f, Tensor::zeros({1, 3, 3}), cfg, a), ShapeError);
}

TEST_CASE("homeo_score endpoint values") {
    Tensor a({2}, {0.5, 0.5});
    CHECK(homeo_score(a, a) == 0.0);
    CHECK(homeo_score(Tensor({2}, {1.0, 0.0}), Tensor({2}, {0.0, 1.0})) ==
          doctest::Approx(std::sqrt(2.0)));
    CHECK(homeo_score(Tensor({2}, {0.7, 0.3}), Tensor({2}, {0.5, 0.5})) ==
          doctest::Approx(std::sqrt(0.08)));
    CHECK_THROWS_AS(homeo_score(a, Tensor({3}, {0.2, 0.3, 0.5})), ShapeError);
}

TEST_CASE("homeo_score symmetry and triangle inequality") {
    RngStream rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto draw = [&rng]() {
            std::vector<double> v(4);
            double z = 0.0;
            for (auto& x : v) {
                x = rng.uniform(0.0, 1.0) + 1e-3;
                z += x;
            }
            for (auto& x : v) x /= z;
            return Tensor({4}, v);
        };
        Tensor p = draw(), q = draw(), r = draw();
        CHECK(homeo_score(p, q) == doctest::Approx(homeo_score(q, p)).epsilon(1e-12));
        CHECK(homeo_score(p, r) <= homeo_score(p, q) + homeo_score(q, r) + 1e-9);
        CHECK(homeo_score(p, q) >= 0.0);
        CHECK(homeo_score(p, q) <= std::sqrt(2.0) + 1e-12);
    }
}

TEST_CASE("warm_start builds one unit entry per class with zero entropy") {
    RngStream rng(3);
    Tensor w = random_tensor({6, 4}, rng);
    MemoryBank bank = warm_start(w, 100);
    bank.check_invariants();
    REQUIRE(bank.num_classes() == 4);
    CHECK(bank.capacity == 100);
    for (std::size_t k = 0; k < 4; ++k) {
        REQUIRE(bank.classes[k].size() == 1);
        CHECK(bank.classes[k][0].entropy == 0.0);
        Tensor column = Tensor::zeros({6});
        for (std::size_t i = 0; i < 6; ++i) column[i] = w.at2(i, k);
        Tensor expect = l2_normalize(column);
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(bank.classes[k][0].embedding[i] == doctest::Approx(expect[i]).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(warm_start(w, 0), ConfigError);
    CHECK_THROWS_AS(warm_start(Tensor::zeros({6}), 10), ShapeError);
}

TEST_CASE("bank_update admission gate is strict") {
    MemoryBank bank;
    bank.capacity = 8;
    bank.classes.resize(3);
    HoPerConfig cfg;  // threshold 0.2
    Tensor emb({4}, {1.0, 2.0, 3.0, 4.0});
    Tensor p({3}, {0.2, 0.3, 0.5});

    MemoryBank rejected = bank_update(bank, emb, p, 0.3, cfg);
    CHECK(rejected.total_entries() == 0);
    MemoryBank boundary = bank_update(bank, emb, p, 0.2, cfg);
    CHECK(boundary.total_entries() == 0);

    MemoryBank admitted = bank_update(bank, emb, p, 0.1, cfg);
    admitted.check_invariants();
    CHECK(admitted.classes[0].empty());
    CHECK(admitted.classes[1].empty());
    REQUIRE(admitted.classes[2].size() == 1);
    const Tensor expect = l2_normalize(emb);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(admitted.classes[2][0].embedding[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
    CHECK(admitted.classes[2][0].entropy ==
          doctest::Approx(shannon_entropy(std::span<const double>(p.data(), 3))));
    CHECK(bank.total_entries() == 0);  // input untouched

    CHECK_THROWS_AS(bank_update(bank, Tensor::zeros({4}), p, 0.1, cfg), ZeroNormError);
    CHECK_THROWS_AS(bank_update(bank, emb, Tensor({2}, {0.5, 0.5}), 0.1, cfg), ShapeError);
}

TEST_CASE("bank_update evicts the highest-entropy entry on overflow") {
    MemoryBank bank;
    bank.capacity = 3;
    bank.classes.resize(1);
    for (double ent : {0.1, 0.9, 0.5}) {
        bank.classes[0].push_back(BankEntry{unit_vec({1.0, double(ent)}), ent});
    }
    HoPerConfig cfg;
    Tensor p({1}, {1.0});  // entropy exactly 0
    MemoryBank out = bank_update(bank, Tensor({2}, {3.0, 4.0}), p, 0.0, cfg);
    out.check_invariants();
    REQUIRE(out.classes[0].size() == 3);
    CHECK(out.classes[0][0].entropy == doctest::Approx(0.1));
    CHECK(out.classes[0][1].entropy == doctest::Approx(0.5));
    CHECK(out.classes[0][2].entropy == doctest::Approx(0.0));
}

TEST_CASE("bank_update can evict the incoming entry itself") {
    MemoryBank bank;
    bank.capacity = 3;
    bank.classes.resize(2);
    for (double ent : {0.01, 0.02, 0.03}) {
        bank.classes[0].push_back(BankEntry{unit_vec({1.0, ent}), ent});
    }
    HoPerConfig cfg;
    Tensor near_uniform({2}, {0.51, 0.49});  // entropy close to ln 2
    MemoryBank out = bank_update(bank, Tensor({2}, {1.0, 1.0}), near_uniform, 0.0, cfg);
    REQUIRE(out.classes[0].size() == 3);
    CHECK(out.classes[0][0].entropy == doctest::Approx(0.01));
    CHECK(out.classes[0][1].entropy == doctest::Approx(0.02));
    CHECK(out.classes[0][2].entropy == doctest::Approx(0.03));
}

TEST_CASE("bank_prune_entropy filters by threshold and keeps order") {
    MemoryBank bank;
    bank.capacity = 10;
    bank.classes.resize(2);
    for (double ent : {0.1, 0.5, 0.9}) {
        bank.classes[0].push_back(BankEntry{unit_vec({1.0, ent}), ent});
    }
    bank.classes[1].push_back(BankEntry{unit_vec({0.0, 1.0}), 0.0});

    // Bound at or above the largest possible entropy: nothing is pruned.
    MemoryBank wide = bank_prune_entropy(bank, 0.9);
    CHECK(wide.classes[0].size() == 3);
    CHECK(wide.classes[1].size() == 1);

    MemoryBank strict = bank_prune_entropy(bank, 0.0);
    CHECK(strict.classes[0].empty());
    CHECK(strict.classes[1].size() == 1);

    MemoryBank mid = bank_prune_entropy(bank, 0.5);
    mid.check_invariants();
    REQUIRE(mid.classes[0].size() == 2);
    CHECK(mid.classes[0][0].entropy == doctest::Approx(0.1));
    CHECK(mid.classes[0][1].entropy == doctest::Approx(0.5));
}

TEST_CASE("prototype_predict on orthonormal singleton banks") {
    MemoryBank bank;
    bank.capacity = 4;
    bank.classes.resize(2);
    bank.classes[0].push_back(BankEntry{Tensor({3}, {1.0, 0.0, 0.0}), 0.0});
    bank.classes[1].push_back(BankEntry{Tensor({3}, {0.0, 1.0, 0.0}), 0.0});
    Tensor fallback({2}, {0.5, 0.5});

    Tensor aligned = prototype_predict(bank, Tensor({3}, {1.0, 0.0, 0.0}), fallback);
    CHECK(aligned[0] == doctest::Approx(0.7310585786).epsilon(1e-8));
    CHECK(aligned[1] == doctest::Approx(0.2689414214).epsilon(1e-8));

    // cosine 0.5 to both prototypes
    Tensor mid = prototype_predict(bank, Tensor({3}, {0.5, 0.5, std::sqrt(0.5)}), fallback);
    CHECK(mid[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(mid[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("prototype_predict matches the brute-force centroid oracle") {
    RngStream rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        MemoryBank bank;
        bank.capacity = 4;
        bank.classes.resize(3);
        for (std::size_t k = 0; k < 3; ++k) {
            const std::size_t n = 1 + rng.uniform_below(4);
            for (std::size_t i = 0; i < n; ++i) {
                bank.classes[k].push_back(BankEntry{l2_normalize(random_tensor({5}, rng)), 0.1});
            }
        }
        bank.check_invariants();
        Tensor q = random_tensor({5}, rng);
        Tensor probs = prototype_predict(bank, q, Tensor({3}, {0.4, 0.3, 0.3}));

        double sum = 0.0;
        for (std::size_t k = 0; k < 3; ++k) sum += probs[k];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

        std::size_t best = 0;
        double best_sim = -2.0;
        for (std::size_t k = 0; k < 3; ++k) {
            Tensor centroid = Tensor::zeros({5});
            for (const auto& e : bank.classes[k]) {
                for (std::size_t i = 0; i < 5; ++i) centroid[i] += e.embedding[i];
            }
            for (std::size_t i = 0; i < 5; ++i) centroid[i] /= double(bank.classes[k].size());
            const double sim = cosine_similarity(q, centroid);
            if (sim > best_sim) {
                best_sim = sim;
                best = k;
            }
        }
        std::size_t argmax = 0;
        for (std::size_t k = 1; k < 3; ++k) {
            if (probs[k] > probs[argmax]) argmax = k;
        }
        CHECK(argmax == best);
    }
}

TEST_CASE("prototype_predict is invariant to query scale") {
    RngStream rng(11);
    MemoryBank bank;
    bank.capacity = 4;
    bank.classes.resize(3);
    for (std::size_t k = 0; k < 3; ++k) {
        bank.classes[k].push_back(BankEntry{l2_normalize(random_tensor({6}, rng)), 0.0});
    }
    Tensor q = random_tensor({6}, rng);
    Tensor scaled = q;
    for (std::size_t i = 0; i < 6; ++i) scaled[i] *= 2.7;
    Tensor a = prototype_predict(bank, q, Tensor({3}, {0.4, 0.3, 0.3}));
    Tensor b = prototype_predict(bank, scaled, Tensor({3}, {0.4, 0.3, 0.3}));
    for (std::size_t k = 0; k < 3; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
}

TEST_CASE("prototype_predict degenerate banks") {
    Tensor fallback({2}, {0.9, 0.1});
    MemoryBank empty;
    empty.capacity = 4;
    empty.classes.resize(2);
    Tensor q({3}, {1.0, 0.0, 0.0});
    Tensor out = prototype_predict(empty, q, fallback);
    CHECK(out[0] == 0.9);
    CHECK(out[1] == 0.1);

    // Only class 1 is populated; class 0 scores sim -1 and cannot win.
    MemoryBank partial = empty;
    partial.classes[1].push_back(BankEntry{Tensor({3}, {1.0, 0.0, 0.0}), 0.0});
    Tensor probs = prototype_predict(partial, q, fallback);
    CHECK(probs[1] > probs[0]);
    const double expect0 = std::exp(-1.0) / (std::exp(-1.0) + std::exp(1.0));
    CHECK(probs[0] == doctest::Approx(expect0).epsilon(1e-9));

    CHECK_THROWS_AS(prototype_predict(partial, Tensor::zeros({3}), fallback), ZeroNormError);
    CHECK_THROWS_AS(prototype_predict(partial, q, Tensor({3}, {0.3, 0.3, 0.4})), ShapeError);
}

TEST_CASE("bank invariant validator rejects corrupted states") {
    MemoryBank bank;
    bank.capacity = 1;
    bank.classes.resize(1);
    bank.classes[0].push_back(BankEntry{unit_vec({1.0, 1.0}), 0.1});
    bank.check_invariants();

    MemoryBank overfull = bank;
    overfull.classes[0].push_back(BankEntry{unit_vec({1.0, 0.0}), 0.1});
    CHECK_THROWS_AS(overfull.check_invariants(), ValueError);

    MemoryBank denormal = bank;
    denormal.classes[0][0].embedding[0] = 2.0;
    CHECK_THROWS_AS(denormal.check_invariants(), ValueError);

    MemoryBank negent = bank;
    negent.classes[0][0].entropy = -0.5;
    CHECK_THROWS_AS(negent.check_invariants(), ValueError);
}

TEST_CASE("bank snapshot round-trips through the binary format") {
    RngStream rng(88);
    MemoryBank bank;
    bank.capacity = 5;
    bank.classes.resize(3);
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < k + 1; ++i) {
            bank.classes[k].push_back(
                BankEntry{l2_normalize(random_tensor({8}, rng)), 0.05 * double(i + 1)});
        }
    }
    std::stringstream buf;
    write_bank(buf, bank);
    MemoryBank back = read_bank(buf);
    back.check_invariants();
    REQUIRE(back.num_classes() == 3);
    CHECK(back.capacity == 5);
    for (std::size_t k = 0; k < 3; ++k) {
        REQUIRE(back.classes[k].size() == bank.classes[k].size());
        for (std::size_t i = 0; i < back.classes[k].size(); ++i) {
            CHECK(back.classes[k][i].entropy ==
                  doctest::Approx(bank.classes[k][i].entropy).epsilon(1e-6));
            for (std::size_t j = 0; j < 8; ++j) {
                CHECK(back.classes[k][i].embedding[j] ==
                      doctest::Approx(bank.classes[k][i].embedding[j]).epsilon(1e-6));
            }
        }
    }

    // A second serialization of the loaded bank must be byte-identical.
    std::stringstream again;
    write_bank(again, back);
    std::stringstream first;
    write_bank(first, bank);
    CHECK(again.str() == first.str());
}

TEST_CASE("bank snapshot rejects corruption") {
    MemoryBank bank = warm_start(Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}), 3);
    std::stringstream buf;
    write_bank(buf, bank);
    std::string bytes = buf.str();

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    std::stringstream bm(bad_magic);
    CHECK_THROWS_AS(read_bank(bm), FormatError);

    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_bank(truncated), FormatError);

    std::string bad_version = bytes;
    bad_version[4] = 9;
    std::stringstream bv(bad_version);
    CHECK_THROWS_AS(read_bank(bv), FormatError);
}

namespace {

nnet::ConvNet adapted_model(std::uint64_t seed, double head_scale = 1.0) {
    nnet::ConvNet model(4);
    RngStream init(seed);
    model.init_kaiming(init);
    for (std::size_t i = 0; i < model.head_w.numel(); ++i) model.head_w[i] *= head_scale;
    return model;
}

std::vector<Tensor> stream_samples(std::size_t n, RngStream& rng) {
    std::vector<Tensor> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(random_tensor({3, 16, 16}, rng, 0.0, 1.0));
    return out;
}

}  // namespace

TEST_CASE("adapt_stream on an empty stream returns the warm start") {
    nnet::ConvNet model = adapted_model(61);
    HoPerConfig cfg;
    RngStream rng(1);
    AdaptationResult res = adapt_stream(model, std::vector<Tensor>{}, cfg, rng);
    CHECK(res.predictions.empty());
    CHECK(res.records.empty());
    MemoryBank warm = warm_start(model.head_w, cfg.capacity);
    REQUIRE(res.bank.num_classes() == warm.num_classes());
    for (std::size_t k = 0; k < warm.num_classes(); ++k) {
        REQUIRE(res.bank.classes[k].size() == 1);
        for (std::size_t i = 0; i < 32; ++i) {
            CHECK(res.bank.classes[k][0].embedding[i] == warm.classes[k][0].embedding[i]);
        }
    }
}

TEST_CASE("single-sample prediction uses only the warm-start prototypes") {
    nnet::ConvNet model = adapted_model(62);
    HoPerConfig cfg;  // fixed lambda, no rng consumption
    RngStream data_rng(63);
    std::vector<Tensor> samples = stream_samples(1, data_rng);
    RngStream rng(2);
    AdaptationResult res = adapt_stream(model, samples, cfg, rng);
    REQUIRE(res.records.size() == 1);

    // Recompute the sample's perturbed embedding with the public primitives.
    Tensor batch1 = Tensor::zeros({1, 3, 16, 16});
    set_sample(batch1, 0, samples[0]);
    const nnet::ForwardResult fwd = nnet::forward(model, batch1, nnet::Mode::kEval);
    const enin::EntropyMask em = enin::entropy_mask(fwd.final_features, model.head_w);
    Tensor mask = Tensor::zeros({1, 4, 4});
    std::copy_n(em.map.data(), 16, mask.data());
    RngStream unused(0);
    const Tensor perturbed =
        causal_perturb(slice_sample(fwd.final_features, 0), mask, cfg, unused);
    Tensor embedding = Tensor::zeros({32});
    for (std::size_t c = 0; c < 32; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < 16; ++i) acc += perturbed[c * 16 + i];
        embedding[c] = acc / 16.0;
    }
    Tensor logits = Tensor::zeros({4});
    for (std::size_t j = 0; j < 4; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < 32; ++c) acc += embedding[c] * model.head_w.at2(c, j);
        logits[j] = acc;
    }
    const Tensor pp = softmax(logits);
    const MemoryBank warm = warm_start(model.head_w, cfg.capacity);
    const Tensor expect = prototype_predict(warm, embedding, pp);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(res.records[0].prototype_probs[j] == doctest::Approx(expect[j]).epsilon(1e-12));
    }
}

TEST_CASE("lambda 1 leaves predictions untouched and admits every sample") {
    nnet::ConvNet model = adapted_model(64);
    HoPerConfig cfg;
    cfg.cp_lambda = 1.0;
    RngStream data_rng(65);
    std::vector<Tensor> samples = stream_samples(30, data_rng);
    RngStream rng(3);
    AdaptationResult res = adapt_stream(model, samples, cfg, rng);
    for (const auto& rec : res.records) {
        CHECK(rec.score <= 1e-9);
        CHECK(rec.admitted);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(rec.p_perturbed[j] == doctest::Approx(rec.p[j]).epsilon(1e-9));
        }
    }
    // An untrained model predicts near-uniform distributions, so entropy
    // pruning removes every admitted entry again: only the warm start stays.
    res.bank.check_invariants();
    CHECK(res.bank.total_entries() == 4);
}

TEST_CASE("adapt_stream audit over a 200-sample stream") {
    nnet::ConvNet model = adapted_model(66, 40.0);  // confident head
    HoPerConfig cfg;
    RngStream data_rng(67);
    std::vector<Tensor> samples = stream_samples(200, data_rng);
    RngStream rng(4);
    AdaptationResult res = adapt_stream(model, samples, cfg, rng);
    REQUIRE(res.predictions.size() == 200);
    REQUIRE(res.records.size() == 200);

    res.bank.check_invariants();
    const double beta = cfg.resolved_entropy_threshold(4);
    for (const auto& cls : res.bank.classes) {
        for (const auto& e : cls) CHECK(e.entropy <= beta);
    }
    for (const auto& rec : res.records) {
        CHECK(rec.admitted == (rec.score < cfg.homeo_threshold));
        double sp = 0.0, spp = 0.0, sproto = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            sp += rec.p[j];
            spp += rec.p_perturbed[j];
            sproto += rec.prototype_probs[j];
        }
        CHECK(sp == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(spp == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(sproto == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(rec.score >= 0.0);
    }
    // The confident head must actually grow the bank beyond the warm start.
    CHECK(res.bank.total_entries() > 4);
}

TEST_CASE("predictions depend only on the stream prefix") {
    nnet::ConvNet model = adapted_model(68, 40.0);
    HoPerConfig cfg;
    RngStream data_rng(69);
    std::vector<Tensor> samples = stream_samples(60, data_rng);
    RngStream rng_full(5);
    AdaptationResult full = adapt_stream(model, samples, cfg, rng_full);
    std::vector<Tensor> prefix(samples.begin(), samples.begin() + 25);
    RngStream rng_prefix(6);
    AdaptationResult part = adapt_stream(model, prefix, cfg, rng_prefix);
    for (std::size_t t = 0; t < 25; ++t) {
        CHECK(part.predictions[t] == full.predictions[t]);
        CHECK(part.records[t].score == full.records[t].score);
    }
}

TEST_CASE("adapt_stream with beta-sampled lambda is seed-deterministic") {
    nnet::ConvNet model = adapted_model(70, 40.0);
    HoPerConfig cfg;
    cfg.cp_lambda_mode = CpLambdaMode::kBeta;
    RngStream data_rng(71);
    std::vector<Tensor> samples = stream_samples(40, data_rng);
    RngStream ra(7), rb(7);
    AdaptationResult a = adapt_stream(model, samples, cfg, ra);
    AdaptationResult b = adapt_stream(model, samples, cfg, rb);
    for (std::size_t t = 0; t < 40; ++t) {
        CHECK(a.predictions[t] == b.predictions[t]);
        CHECK(a.records[t].score == b.records[t].score);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(a.records[t].prototype_probs[j] == b.records[t].prototype_probs[j]);
        }
    }
}

TEST_CASE("bank snapshot file helpers") {
    MemoryBank bank = warm_start(Tensor({2, 2}, {3.0, 0.0, 0.0, 4.0}), 7);
    const std::string path = "/tmp/inper_test_bank.ipbk";
    save_bank(path, bank);
    MemoryBank back = load_bank(path);
    CHECK(back.capacity == 7);
    CHECK(back.num_classes() == 2);
    CHECK(back.classes[0][0].embedding[0] == doctest::Approx(1.0));
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_bank("/tmp/inper_no_such_bank.ipbk"), NotFoundError);
}
