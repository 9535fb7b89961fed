#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "inper/enin.hpp"
#include "inper/tensor.hpp"

namespace inper::nnet {
struct ConvNet;
}

namespace inper::hoper {

enum class CpLambdaMode { kFixed, kBeta };

struct HoPerConfig {
    double homeo_threshold = 0.2;
    /// Entropy bound in nats; negative means "use 0.4 * ln(num_classes)".
    double entropy_threshold = -1.0;
    std::size_t capacity = 100;
    CpLambdaMode cp_lambda_mode = CpLambdaMode::kFixed;
    double cp_lambda = 0.5;      // used when cp_lambda_mode == kFixed
    double cp_beta_alpha = 0.1;  // Beta(a,a) concentration when kBeta
    enin::PatchRatio patch_ratio = enin::PatchRatio::kQuarter;
    double eps = 1e-6;

    double resolved_entropy_threshold(std::size_t num_classes) const;
};

/// Accepts "fixed:<value>" or "beta" (optionally "beta:<alpha>").
void set_cp_lambda(HoPerConfig& cfg, const std::string& text);
std::string cp_lambda_name(const HoPerConfig& cfg);

struct BankEntry {
    Tensor embedding;  // [C], unit norm
    double entropy = 0.0;
};

/// Per-class store of stable embeddings. Entries keep insertion order; the
/// capacity bound applies per class.
struct MemoryBank {
    std::vector<std::vector<BankEntry>> classes;
    std::size_t capacity = 100;

    std::size_t num_classes() const { return classes.size(); }
    std::size_t total_entries() const;
    /// Throws ValueError when a structural invariant (unit norms within 1e-5,
    /// nonnegative entropies, per-class size <= capacity) is broken.
    void check_invariants() const;
};

/// One bank entry per class: the l2-normalized k-th classifier weight column
/// with entropy 0. classifier_weights is [C,K].
MemoryBank warm_start(const Tensor& classifier_weights, std::size_t capacity);

/// Renormalize a single feature map toward the statistics of its own
/// minimum-entropy patch: gamma_mix*(g - mu)/sigma + beta_mix, with
/// gamma_mix = lambda*sigma(g) + (1-lambda)*sigma(masked patch) and beta_mix
/// the same mix of means. features: [C,h,w]; mask: [1,h,w] or [h,w] at the
/// same spatial shape.
Tensor causal_perturb(const Tensor& features, const Tensor& mask, const HoPerConfig& cfg,
                      RngStream& rng);

/// Euclidean distance between two probability vectors of equal length.
double homeo_score(std::span<const double> p, std::span<const double> p_perturbed);
double homeo_score(const Tensor& p, const Tensor& p_perturbed);

/// Admit (embedding, H(p_perturbed)) to class argmax(p_perturbed) iff
/// score < homeo_threshold; on overflow the highest-entropy entry of that
/// class is evicted (earliest such entry on ties). The input bank is not
/// modified.
MemoryBank bank_update(const MemoryBank& bank, const Tensor& embedding, const Tensor& p_perturbed,
                       double score, const HoPerConfig& cfg);

/// Keep only entries with entropy <= beta, preserving order.
MemoryBank bank_prune_entropy(const MemoryBank& bank, double beta);

/// Softmax over cosine similarities between the query and the per-class
/// centroids (arithmetic means of the stored embeddings). Empty or
/// zero-centroid classes score -1 so they never win; a fully empty bank
/// returns the fallback distribution unchanged.
Tensor prototype_predict(const MemoryBank& bank, const Tensor& embedding, const Tensor& fallback);

/// Class fields here are 0-based positions in the probability vector (the
/// bank's class index); callers owning a 1..K label convention add 1.
struct AdaptationRecord {
    Tensor p;            // head probabilities of the unperturbed sample
    Tensor p_perturbed;  // head probabilities after causal perturbation
    std::size_t pseudo_label = 0;  // argmax of p_perturbed
    double score = 0.0;            // homeo_score(p, p_perturbed)
    bool admitted = false;         // score < homeo_threshold
    Tensor prototype_probs;        // reported prediction for this sample
};

struct AdaptationResult {
    std::vector<std::size_t> predictions;  // argmax of prototype_probs per sample
    std::vector<AdaptationRecord> records;
    MemoryBank bank;  // state after the full stream
};

/// Sequential test-time adaptation over an ordered stream. The prediction
/// for sample t uses only the warm start and samples with index < t: predict
/// first, then update, then prune. The admitted flag records the HomeoScore
/// gate alone; entropy pruning may still drop the entry in the same step.
AdaptationResult adapt_stream(const nnet::ConvNet& model,
                              const std::vector<Tensor>& samples,  // each [C,H,W]
                              const HoPerConfig& cfg, RngStream& rng);
AdaptationResult adapt_stream(const nnet::ConvNet& model, const Tensor& inputs,  // [N,C,H,W]
                              const HoPerConfig& cfg, RngStream& rng);

/// Bank snapshot, magic "IPBK": version u16, then u32 num_classes, capacity
/// and embedding dim, u32 per-class entry counts, then per class each entry
/// as dim f32 little-endian values followed by one f32 entropy.
void write_bank(std::ostream& os, const MemoryBank& bank);
MemoryBank read_bank(std::istream& is);
void save_bank(const std::string& path, const MemoryBank& bank);
MemoryBank load_bank(const std::string& path);

}  // namespace inper::hoper
