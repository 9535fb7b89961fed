#include "inper/hoper.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "inper/io_le.hpp"
#include "inper/nnet.hpp"

namespace inper::hoper {

double HoPerConfig::resolved_entropy_threshold(std::size_t num_classes) const {
    if (entropy_threshold >= 0.0) return entropy_threshold;
    if (num_classes == 0) throw ValueError("cannot resolve entropy threshold for zero classes");
    return 0.4 * std::log(double(num_classes));
}

void set_cp_lambda(HoPerConfig& cfg, const std::string& text) {
    if (text.rfind("fixed:", 0) == 0) {
        double v = 0.0;
        try {
            v = std::stod(text.substr(6));
        } catch (const std::exception&) {
            throw ConfigError("cannot parse cp-lambda value in \"" + text + "\"");
        }
        if (v < 0.0 || v > 1.0) throw ConfigError("fixed cp-lambda must lie in [0,1]");
        cfg.cp_lambda_mode = CpLambdaMode::kFixed;
        cfg.cp_lambda = v;
        return;
    }
    if (text == "beta") {
        cfg.cp_lambda_mode = CpLambdaMode::kBeta;
        return;
    }
    if (text.rfind("beta:", 0) == 0) {
        double a = 0.0;
        try {
            a = std::stod(text.substr(5));
        } catch (const std::exception&) {
            throw ConfigError("cannot parse cp-lambda alpha in \"" + text + "\"");
        }
        if (a <= 0.0) throw ConfigError("cp-lambda beta alpha must be positive");
        cfg.cp_lambda_mode = CpLambdaMode::kBeta;
        cfg.cp_beta_alpha = a;
        return;
    }
    throw ConfigError("cp-lambda must be \"fixed:<value>\" or \"beta[:<alpha>]\", got \"" +
                      text + "\"");
}

std::string cp_lambda_name(const HoPerConfig& cfg) {
    if (cfg.cp_lambda_mode == CpLambdaMode::kFixed) {
        return "fixed:" + std::to_string(cfg.cp_lambda);
    }
    return "beta:" + std::to_string(cfg.cp_beta_alpha);
}

std::size_t MemoryBank::total_entries() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.size();
    return n;
}

void MemoryBank::check_invariants() const {
    for (const auto& cls : classes) {
        if (cls.size() > capacity) throw ValueError("memory bank class exceeds its capacity");
        for (const auto& e : cls) {
            if (e.embedding.rank() != 1) throw ValueError("bank embedding must be rank 1");
            double norm = 0.0;
            for (std::size_t i = 0; i < e.embedding.numel(); ++i) {
                norm += e.embedding[i] * e.embedding[i];
            }
            norm = std::sqrt(norm);
            if (std::abs(norm - 1.0) > 1e-5) throw ValueError("bank embedding is not unit norm");
            if (!(e.entropy >= 0.0) || !std::isfinite(e.entropy)) {
                throw ValueError("bank entropy must be finite and nonnegative");
            }
        }
    }
}

MemoryBank warm_start(const Tensor& classifier_weights, std::size_t capacity) {
    if (classifier_weights.rank() != 2) {
        throw ShapeError("warm_start expects classifier weights [C,K]");
    }
    if (capacity == 0) throw ConfigError("bank capacity must be at least 1");
    const std::size_t c = classifier_weights.extent(0), k = classifier_weights.extent(1);
    MemoryBank bank;
    bank.capacity = capacity;
    bank.classes.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        Tensor column = Tensor::zeros({c});
        for (std::size_t i = 0; i < c; ++i) column[i] = classifier_weights.at2(i, j);
        bank.classes[j].push_back(BankEntry{l2_normalize(column), 0.0});
    }
    return bank;
}

Tensor causal_perturb(const Tensor& features, const Tensor& mask, const HoPerConfig& cfg,
                      RngStream& rng) {
    if (features.rank() != 3) {
        throw ShapeError("causal_perturb expects a single feature map [C,h,w]");
    }
    const std::size_t c = features.extent(0);
    const std::size_t hw = features.extent(1) * features.extent(2);

    const double lambda = cfg.cp_lambda_mode == CpLambdaMode::kFixed
                              ? cfg.cp_lambda
                              : sample_beta(cfg.cp_beta_alpha, rng);

    const enin::PatchSelection sel =
        enin::select_patch(mask, features, cfg.patch_ratio, enin::PatchMode::kMin);
    const InstanceStats patch = enin::masked_patch_stats(sel.features, sel.mask, cfg.eps);

    Tensor out = Tensor::zeros(features.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* f = features.data() + ch * hw;
        double sum = 0.0;
        for (std::size_t i = 0; i < hw; ++i) sum += f[i];
        const double mu = sum / double(hw);
        double var = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
            const double d = f[i] - mu;
            var += d * d;
        }
        const double sigma = std::sqrt(var / double(hw) + cfg.eps);
        const double gamma = lambda * sigma + (1.0 - lambda) * patch.sigma[ch];
        const double beta = lambda * mu + (1.0 - lambda) * patch.mu[ch];
        double* dst = out.data() + ch * hw;
        for (std::size_t i = 0; i < hw; ++i) {
            dst[i] = gamma * (f[i] - mu) / sigma + beta;
        }
    }
    return out;
}

double homeo_score(std::span<const double> p, std::span<const double> p_perturbed) {
    if (p.size() != p_perturbed.size()) {
        throw ShapeError("homeo_score requires equal-length probability vectors");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - p_perturbed[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double homeo_score(const Tensor& p, const Tensor& p_perturbed) {
    return homeo_score(std::span<const double>(p.data(), p.numel()),
                       std::span<const double>(p_perturbed.data(), p_perturbed.numel()));
}

MemoryBank bank_update(const MemoryBank& bank, const Tensor& embedding, const Tensor& p_perturbed,
                       double score, const HoPerConfig& cfg) {
    if (p_perturbed.rank() != 1 || p_perturbed.numel() != bank.num_classes()) {
        throw ShapeError("perturbed probabilities must have one entry per bank class");
    }
    if (score >= cfg.homeo_threshold) {
        return bank;
    }
    const Tensor unit = l2_normalize(embedding);
    const double entropy =
        shannon_entropy(std::span<const double>(p_perturbed.data(), p_perturbed.numel()));
    std::size_t label = 0;
    for (std::size_t j = 1; j < p_perturbed.numel(); ++j) {
        if (p_perturbed[j] > p_perturbed[label]) label = j;
    }

    MemoryBank out = bank;
    auto& cls = out.classes[label];
    cls.push_back(BankEntry{unit, entropy});
    if (cls.size() > out.capacity) {
        std::size_t worst = 0;
        for (std::size_t i = 1; i < cls.size(); ++i) {
            if (cls[i].entropy > cls[worst].entropy) worst = i;
        }
        cls.erase(cls.begin() + std::ptrdiff_t(worst));
    }
    return out;
}

MemoryBank bank_prune_entropy(const MemoryBank& bank, double beta) {
    MemoryBank out;
    out.capacity = bank.capacity;
    out.classes.resize(bank.num_classes());
    for (std::size_t k = 0; k < bank.num_classes(); ++k) {
        for (const auto& e : bank.classes[k]) {
            if (e.entropy <= beta) out.classes[k].push_back(e);
        }
    }
    return out;
}

Tensor prototype_predict(const MemoryBank& bank, const Tensor& embedding, const Tensor& fallback) {
    if (embedding.rank() != 1) throw ShapeError("query embedding must be rank 1");
    const std::size_t k = bank.num_classes();
    if (fallback.rank() != 1 || fallback.numel() != k) {
        throw ShapeError("fallback distribution must have one entry per bank class");
    }
    double qnorm = 0.0;
    for (std::size_t i = 0; i < embedding.numel(); ++i) qnorm += embedding[i] * embedding[i];
    if (std::sqrt(qnorm) < 1e-300) throw ZeroNormError("query embedding has zero norm");
    if (bank.total_entries() == 0) return fallback;

    std::vector<double> sims(k, -1.0);
    for (std::size_t j = 0; j < k; ++j) {
        const auto& cls = bank.classes[j];
        if (cls.empty()) continue;
        Tensor centroid = Tensor::zeros(cls.front().embedding.shape());
        for (const auto& e : cls) {
            for (std::size_t i = 0; i < centroid.numel(); ++i) centroid[i] += e.embedding[i];
        }
        double cnorm = 0.0;
        for (std::size_t i = 0; i < centroid.numel(); ++i) {
            centroid[i] /= double(cls.size());
            cnorm += centroid[i] * centroid[i];
        }
        if (std::sqrt(cnorm) < 1e-12) continue;  // degenerate centroid, leave sim at -1
        sims[j] = cosine_similarity(embedding, centroid);
    }
    const std::vector<double> probs = softmax(std::span<const double>(sims));
    Tensor out = Tensor::zeros({k});
    std::copy(probs.begin(), probs.end(), out.data());
    return out;
}

AdaptationResult adapt_stream(const nnet::ConvNet& model, const std::vector<Tensor>& samples,
                              const HoPerConfig& cfg, RngStream& rng) {
    const std::size_t n = samples.size();
    const std::size_t k = model.num_classes();
    const double beta = cfg.resolved_entropy_threshold(k);

    AdaptationResult result;
    result.bank = warm_start(model.head_w, cfg.capacity);
    result.predictions.reserve(n);
    result.records.reserve(n);

    for (std::size_t t = 0; t < n; ++t) {
        const Tensor& sample = samples[t];
        if (sample.rank() != 3) throw ShapeError("adapt_stream samples must be [C,H,W]");
        Tensor batch1 = Tensor::zeros({1, sample.extent(0), sample.extent(1), sample.extent(2)});
        set_sample(batch1, 0, sample);
        const nnet::ForwardResult fwd = nnet::forward(model, batch1, nnet::Mode::kEval);
        const Tensor p = softmax(fwd.logits);  // [1,K]

        const enin::EntropyMask em = enin::entropy_mask(fwd.final_features, model.head_w);
        Tensor mask = Tensor::zeros(
            {1, fwd.final_features.extent(2), fwd.final_features.extent(3)});
        std::copy_n(em.map.data(), mask.numel(), mask.data());
        const Tensor features = slice_sample(fwd.final_features, 0);
        const Tensor perturbed = causal_perturb(features, mask, cfg, rng);

        // Re-pool and re-classify through the linear head only.
        const std::size_t c = perturbed.extent(0);
        const std::size_t hw = perturbed.extent(1) * perturbed.extent(2);
        Tensor embedding = Tensor::zeros({c});
        for (std::size_t f = 0; f < c; ++f) {
            const double* fp = perturbed.data() + f * hw;
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += fp[i];
            embedding[f] = acc / double(hw);
        }
        Tensor logits = Tensor::zeros({k});
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t f = 0; f < c; ++f) acc += embedding[f] * model.head_w.at2(f, j);
            logits[j] = acc;
        }
        const Tensor pp = softmax(logits);

        AdaptationRecord rec;
        rec.p = Tensor::zeros({k});
        std::copy_n(p.data(), k, rec.p.data());
        rec.p_perturbed = pp;
        rec.pseudo_label = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (pp[j] > pp[rec.pseudo_label]) rec.pseudo_label = j;
        }
        rec.score = homeo_score(rec.p, pp);
        rec.admitted = rec.score < cfg.homeo_threshold;

        double enorm = 0.0;
        for (std::size_t f = 0; f < c; ++f) enorm += embedding[f] * embedding[f];
        if (enorm == 0.0) {
            // Degenerate all-zero embedding: fall back to the head and leave
            // the bank untouched.
            rec.admitted = false;
            rec.prototype_probs = pp;
        } else {
            rec.prototype_probs = prototype_predict(result.bank, embedding, pp);
            result.bank = bank_update(result.bank, embedding, pp, rec.score, cfg);
            result.bank = bank_prune_entropy(result.bank, beta);
        }
        std::size_t pred = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (rec.prototype_probs[j] > rec.prototype_probs[pred]) pred = j;
        }
        result.predictions.push_back(pred);
        result.records.push_back(std::move(rec));
    }
    return result;
}

AdaptationResult adapt_stream(const nnet::ConvNet& model, const Tensor& inputs,
                              const HoPerConfig& cfg, RngStream& rng) {
    if (inputs.rank() != 4) throw ShapeError("adapt_stream expects a stream [N,C,H,W]");
    std::vector<Tensor> samples;
    samples.reserve(inputs.extent(0));
    for (std::size_t t = 0; t < inputs.extent(0); ++t) {
        samples.push_back(slice_sample(inputs, t));
    }
    return adapt_stream(model, samples, cfg, rng);
}

void write_bank(std::ostream& os, const MemoryBank& bank) {
    std::size_t dim = 0;
    for (const auto& cls : bank.classes) {
        if (!cls.empty()) {
            dim = cls.front().embedding.numel();
            break;
        }
    }
    io::write_magic(os, "IPBK");
    io::write_u16(os, 1);
    io::write_u32(os, std::uint32_t(bank.num_classes()));
    io::write_u32(os, std::uint32_t(bank.capacity));
    io::write_u32(os, std::uint32_t(dim));
    for (const auto& cls : bank.classes) io::write_u32(os, std::uint32_t(cls.size()));
    for (const auto& cls : bank.classes) {
        for (const auto& e : cls) {
            if (e.embedding.numel() != dim) {
                throw FormatError("bank embeddings have inconsistent dimensions");
            }
            for (std::size_t i = 0; i < dim; ++i) io::write_f32(os, float(e.embedding[i]));
            io::write_f32(os, float(e.entropy));
        }
    }
}

MemoryBank read_bank(std::istream& is) {
    io::expect_magic(is, "IPBK", "bank snapshot");
    const std::uint16_t version = io::read_u16(is, "version");
    if (version != 1) {
        throw FormatError("unsupported bank snapshot version " + std::to_string(version));
    }
    const std::uint32_t k = io::read_u32(is, "class count");
    const std::uint32_t capacity = io::read_u32(is, "capacity");
    const std::uint32_t dim = io::read_u32(is, "embedding dim");
    if (capacity == 0) throw FormatError("bank snapshot declares zero capacity");
    std::vector<std::uint32_t> counts(k);
    for (auto& c : counts) c = io::read_u32(is, "entry count");

    MemoryBank bank;
    bank.capacity = capacity;
    bank.classes.resize(k);
    for (std::uint32_t j = 0; j < k; ++j) {
        if (counts[j] > capacity) throw FormatError("bank snapshot class exceeds capacity");
        if (counts[j] > 0 && dim == 0) throw FormatError("bank snapshot entries without a dim");
        for (std::uint32_t e = 0; e < counts[j]; ++e) {
            BankEntry entry;
            entry.embedding = Tensor::zeros({dim});
            for (std::uint32_t i = 0; i < dim; ++i) {
                entry.embedding[i] = io::read_f32(is, "embedding");
            }
            entry.entropy = io::read_f32(is, "entropy");
            bank.classes[j].push_back(std::move(entry));
        }
    }
    return bank;
}

void save_bank(const std::string& path, const MemoryBank& bank) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open \"" + path + "\" for writing");
    write_bank(os, bank);
    os.flush();
    if (!os) throw FormatError("failed writing \"" + path + "\"");
}

MemoryBank load_bank(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NotFoundError("cannot open bank snapshot \"" + path + "\"");
    return read_bank(is);
}

}  // namespace inper::hoper
