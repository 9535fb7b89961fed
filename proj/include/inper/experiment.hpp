#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "inper/datagen.hpp"
#include "inper/hoper.hpp"
#include "inper/nnet.hpp"

namespace inper::experiment {

/// Ablation rows: plain training, training-time intervention only (head
/// predictions at test time), the full method, and the admit-all bank that
/// removes the HomeoScore gate.
enum class Method { kBaseline, kEnin, kInper, kInperNoHomeo };

Method parse_method(std::string_view name);
std::string_view method_name(Method m);

/// Train on a split with the method's EnIn setting (baseline trains without
/// EnIn, every other method with it). The run seed replaces cfg.seed through
/// a role-tagged derivation so train/adapt streams stay independent.
nnet::ConvNet train_model(const datagen::DomainDataset& split, Method method,
                          nnet::TrainConfig cfg, std::uint64_t seed,
                          std::vector<double>* losses = nullptr);

/// Argmax-of-logits accuracy of the linear head.
double evaluate_head(const nnet::ConvNet& model, const datagen::DomainDataset& split);

/// Pooled final-feature embeddings [N,32] of a split, eval mode.
Tensor embed_split(const nnet::ConvNet& model, const datagen::DomainDataset& split);

struct AdaptOutcome {
    double accuracy = 0.0;
    hoper::AdaptationResult result;
    std::vector<std::size_t> stream_labels;  // ground truth in stream order
};

/// Shuffle the split into a stream (order derived from the seed), run
/// adapt_stream, and score its predictions. kInperNoHomeo lifts the
/// HomeoScore gate by setting the admission threshold to +infinity.
AdaptOutcome adapt_and_eval(const nnet::ConvNet& model, const datagen::DomainDataset& split,
                            hoper::HoPerConfig cfg, Method method, std::uint64_t seed);

struct RunResult {
    double accuracy = 0.0;       // target-domain accuracy of the method
    std::vector<double> losses;  // training loss curve
    bool has_adaptation = false;
    AdaptOutcome adaptation;     // populated for the inper methods
};

/// Leave-one-out end to end: train on the sources, then score the target by
/// head prediction (baseline/enin) or adapted prototype prediction (inper*).
RunResult run_single(const datagen::DomainDataset& data, std::size_t target_domain,
                     Method method, const nnet::TrainConfig& train_tpl,
                     const hoper::HoPerConfig& hoper_tpl, std::uint64_t seed);

/// Mean and sample standard deviation (n-1 denominator, 0 for n < 2).
struct Aggregate {
    double mean = 0.0;
    double std = 0.0;
};
Aggregate aggregate(const std::vector<double>& values);

/// Collects metric lines — each a JSON object with exactly the fields
/// {command, seed, target_domain, method, metric, value} — and writes them
/// through a temp file renamed into place, so readers never see a torn file.
class MetricsLog {
  public:
    void add(std::string_view command, std::int64_t seed, std::size_t target_domain,
             std::string_view method, std::string_view metric, double value);
    const std::vector<std::string>& lines() const { return lines_; }
    void write_file(const std::string& path) const;

  private:
    std::vector<std::string> lines_;
};

/// Everything a CLI invocation needs. Flags override the config file; unset
/// strings stay empty and a target_domain of 0 means "not given".
struct ExperimentConfig {
    std::string dataset_dir;
    std::string out_dir;
    std::string model_path;  // adapt/eval/dump; empty -> <out>/seed-<s>/model.ipnn
    std::size_t target_domain = 0;
    Method method = Method::kBaseline;
    std::vector<std::uint64_t> seeds{0};
    nnet::TrainConfig train;
    hoper::HoPerConfig hoper;
    // gen-data parameters; an empty domain list means the canonical four.
    std::size_t classes = 4;
    std::size_t per_domain = 500;
    std::uint64_t data_seed = 7;
    std::vector<datagen::DomainSpec> domains;
};

/// Parse a JSON config document. Unknown keys are rejected so a typo cannot
/// silently fall back to a default.
ExperimentConfig config_from_json(const std::string& json_text);
ExperimentConfig config_from_file(const std::string& path);

// Subcommand bodies shared by the CLI binary and the tests. All throw the
// library error types; the CLI maps them to exit codes.
void cmd_gen_data(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
void cmd_adapt(const ExperimentConfig& cfg);
void cmd_eval(const ExperimentConfig& cfg);
void cmd_dump_embeddings(const ExperimentConfig& cfg);

}  // namespace inper::experiment
