#include "inper/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "inper/errors.hpp"

namespace inper::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kEvalChunk = 64;

std::size_t argmax_row(const Tensor& mat, std::size_t row) {
    const std::size_t k = mat.extent(1);
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
        if (mat.at2(row, j) > mat.at2(row, best)) best = j;
    }
    return best;
}

Tensor rows_slice(const Tensor& images, std::size_t begin, std::size_t count) {
    const std::size_t stride = images.numel() / images.extent(0);
    std::vector<double> data(images.data() + begin * stride,
                             images.data() + (begin + count) * stride);
    return Tensor({count, images.extent(1), images.extent(2), images.extent(3)},
                  std::move(data));
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

/// Write through a sibling temp file and rename into place.
template <typename Fn>
void atomic_file(const std::string& path, Fn&& body) {
    ensure_parent(path);
    const std::string tmp = path + ".tmp";
    body(tmp);
    fs::rename(tmp, path);
}

std::string seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
    return (fs::path(cfg.out_dir) / ("seed-" + std::to_string(seed))).string();
}

std::string resolve_model_path(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (!cfg.model_path.empty()) return cfg.model_path;
    if (cfg.out_dir.empty()) {
        throw ConfigError("no model path: give --model or the --out of a prior train run");
    }
    return (fs::path(seed_dir(cfg, seed)) / "model.ipnn").string();
}

void require(bool ok, const char* message) {
    if (!ok) throw ConfigError(message);
}

const char* kMethodNames[] = {"baseline", "enin", "inper", "inper-no-homeoscore"};

}  // namespace

Method parse_method(std::string_view name) {
    for (std::size_t i = 0; i < 4; ++i) {
        if (name == kMethodNames[i]) return Method(i);
    }
    throw ConfigError("unknown method '" + std::string(name) +
                      "' (expected baseline, enin, inper or inper-no-homeoscore)");
}

std::string_view method_name(Method m) { return kMethodNames[std::size_t(m)]; }

nnet::ConvNet train_model(const datagen::DomainDataset& split, Method method,
                          nnet::TrainConfig cfg, std::uint64_t seed,
                          std::vector<double>* losses) {
    cfg.use_enin = method != Method::kBaseline;
    cfg.seed = derive_seed(seed, "train");
    std::size_t classes = 0;
    for (std::size_t l : split.labels) classes = std::max(classes, l);
    nnet::ConvNet model(classes, split.images.extent(1));
    RngStream init_rng(derive_seed(cfg.seed, "init"));
    model.init_kaiming(init_rng);
    if (losses) losses->clear();
    if (cfg.use_enin && cfg.steps > 1) {
        // The intervention assumes a backbone whose entropy maps already mean
        // something; from a random init it only injects noise. Spend the first
        // third of the step budget on plain ERM, then enable EnIn, keeping the
        // total step count identical to the baseline's.
        nnet::TrainConfig warm = cfg;
        warm.use_enin = false;
        warm.steps = cfg.steps / 3;
        warm.seed = derive_seed(cfg.seed, "warmup");
        const nnet::TrainResult head = nnet::train(model, split.images, split.labels, warm);
        cfg.steps -= warm.steps;
        const nnet::TrainResult tail = nnet::train(model, split.images, split.labels, cfg);
        if (losses) {
            *losses = head.losses;
            losses->insert(losses->end(), tail.losses.begin(), tail.losses.end());
        }
        return model;
    }
    const nnet::TrainResult result = nnet::train(model, split.images, split.labels, cfg);
    if (losses) *losses = result.losses;
    return model;
}

double evaluate_head(const nnet::ConvNet& model, const datagen::DomainDataset& split) {
    const std::size_t n = split.size();
    if (n == 0) throw ValueError("cannot evaluate an empty split");
    std::size_t hits = 0;
    for (std::size_t begin = 0; begin < n; begin += kEvalChunk) {
        const std::size_t count = std::min(kEvalChunk, n - begin);
        const auto out = nnet::forward(model, rows_slice(split.images, begin, count),
                                       nnet::Mode::kEval);
        for (std::size_t i = 0; i < count; ++i) {
            if (argmax_row(out.logits, i) + 1 == split.labels[begin + i]) ++hits;
        }
    }
    return double(hits) / double(n);
}

Tensor embed_split(const nnet::ConvNet& model, const datagen::DomainDataset& split) {
    const std::size_t n = split.size();
    if (n == 0) throw ValueError("cannot embed an empty split");
    Tensor out;
    std::vector<double> data;
    std::size_t dim = 0;
    for (std::size_t begin = 0; begin < n; begin += kEvalChunk) {
        const std::size_t count = std::min(kEvalChunk, n - begin);
        const auto fwd = nnet::forward(model, rows_slice(split.images, begin, count),
                                       nnet::Mode::kEval);
        dim = fwd.pooled.extent(1);
        data.insert(data.end(), fwd.pooled.vec().begin(), fwd.pooled.vec().end());
    }
    return Tensor({n, dim}, std::move(data));
}

AdaptOutcome adapt_and_eval(const nnet::ConvNet& model, const datagen::DomainDataset& split,
                            hoper::HoPerConfig cfg, Method method, std::uint64_t seed) {
    if (method == Method::kInperNoHomeo) {
        cfg.homeo_threshold = std::numeric_limits<double>::infinity();
    } else if (method != Method::kInper) {
        throw ConfigError("adaptation applies to the inper methods only");
    }
    RngStream order_rng(derive_seed(seed, "stream"));
    const std::vector<std::size_t> order = batch_permutation(split.size(), order_rng);

    AdaptOutcome out;
    std::vector<Tensor> stream;
    stream.reserve(split.size());
    out.stream_labels.reserve(split.size());
    for (std::size_t i = 0; i < split.size(); ++i) {
        stream.push_back(slice_sample(split.images, order[i]));
        out.stream_labels.push_back(split.labels[order[i]]);
    }
    RngStream adapt_rng(derive_seed(seed, "adapt"));
    out.result = hoper::adapt_stream(model, stream, cfg, adapt_rng);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < split.size(); ++i) {
        // adapt_stream reports 0-based class indices; labels are 1..K.
        if (out.result.predictions[i] + 1 == out.stream_labels[i]) ++hits;
    }
    out.accuracy = split.size() == 0 ? 0.0 : double(hits) / double(split.size());
    return out;
}

RunResult run_single(const datagen::DomainDataset& data, std::size_t target_domain,
                     Method method, const nnet::TrainConfig& train_tpl,
                     const hoper::HoPerConfig& hoper_tpl, std::uint64_t seed) {
    const auto split = datagen::leave_one_out(data, target_domain);
    RunResult out;
    const nnet::ConvNet model = train_model(split.source, method, train_tpl, seed, &out.losses);
    if (method == Method::kBaseline || method == Method::kEnin) {
        out.accuracy = evaluate_head(model, split.target);
    } else {
        out.adaptation = adapt_and_eval(model, split.target, hoper_tpl, method, seed);
        out.has_adaptation = true;
        out.accuracy = out.adaptation.accuracy;
    }
    return out;
}

Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    if (values.empty()) return a;
    for (double v : values) a.mean += v;
    a.mean /= double(values.size());
    if (values.size() < 2) return a;
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / double(values.size() - 1));
    return a;
}

void MetricsLog::add(std::string_view command, std::int64_t seed, std::size_t target_domain,
                     std::string_view method, std::string_view metric, double value) {
    json j;
    j["command"] = command;
    j["seed"] = seed;
    j["target_domain"] = target_domain;
    j["method"] = method;
    j["metric"] = metric;
    j["value"] = value;
    lines_.push_back(j.dump());
}

void MetricsLog::write_file(const std::string& path) const {
    atomic_file(path, [&](const std::string& tmp) {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw FormatError("cannot open '" + tmp + "' for writing");
        for (const std::string& line : lines_) os << line << '\n';
        os.flush();
        if (!os) throw FormatError("write failed for '" + tmp + "'");
    });
}

namespace {

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const char* where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) known = known || it.key() == k;
        if (!known) {
            throw ConfigError("unknown key '" + it.key() + "' in " + where + " config");
        }
    }
}

double as_number(const json& v, const char* what) {
    if (!v.is_number()) throw ConfigError(std::string(what) + " must be a number");
    return v.get<double>();
}

std::size_t as_index(const json& v, const char* what) {
    if (!v.is_number_unsigned()) {
        throw ConfigError(std::string(what) + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

std::string as_string(const json& v, const char* what) {
    if (!v.is_string()) throw ConfigError(std::string(what) + " must be a string");
    return v.get<std::string>();
}

datagen::DomainSpec domain_from_json(const json& d) {
    require_keys(d, {"id", "gain", "bias", "texture", "contrast", "leakage"}, "domain");
    datagen::DomainSpec s;
    s.id = as_index(d.at("id"), "domain id");
    auto triple = [](const json& v, const char* what) {
        if (!v.is_array() || v.size() != 3) {
            throw ConfigError(std::string(what) + " must be an array of three numbers");
        }
        std::array<double, 3> out{};
        for (std::size_t i = 0; i < 3; ++i) out[i] = as_number(v[i], what);
        return out;
    };
    if (d.contains("gain")) s.gain = triple(d.at("gain"), "domain gain");
    if (d.contains("bias")) s.bias = triple(d.at("bias"), "domain bias");
    if (d.contains("texture")) s.texture = datagen::parse_texture(as_string(d.at("texture"), "texture"));
    if (d.contains("contrast")) s.contrast = as_number(d.at("contrast"), "contrast");
    if (d.contains("leakage")) s.leakage = as_number(d.at("leakage"), "leakage");
    return s;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& json_text) {
    const json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw FormatError("config is not a JSON object");
    }
    require_keys(j, {"dataset", "out", "model", "target_domain", "method", "seeds", "train",
                     "hoper", "data"},
                 "top-level");
    ExperimentConfig cfg;
    if (j.contains("dataset")) cfg.dataset_dir = as_string(j.at("dataset"), "dataset");
    if (j.contains("out")) cfg.out_dir = as_string(j.at("out"), "out");
    if (j.contains("model")) cfg.model_path = as_string(j.at("model"), "model");
    if (j.contains("target_domain")) {
        cfg.target_domain = as_index(j.at("target_domain"), "target_domain");
    }
    if (j.contains("method")) cfg.method = parse_method(as_string(j.at("method"), "method"));
    if (j.contains("seeds")) {
        const json& s = j.at("seeds");
        if (!s.is_array() || s.empty()) throw ConfigError("seeds must be a non-empty array");
        cfg.seeds.clear();
        for (const json& v : s) cfg.seeds.push_back(as_index(v, "seed"));
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        require_keys(t, {"learning_rate", "momentum", "weight_decay", "steps", "batch_size",
                         "enin"},
                     "train");
        if (t.contains("learning_rate")) {
            cfg.train.learning_rate = as_number(t.at("learning_rate"), "learning_rate");
        }
        if (t.contains("momentum")) cfg.train.momentum = as_number(t.at("momentum"), "momentum");
        if (t.contains("weight_decay")) {
            cfg.train.weight_decay = as_number(t.at("weight_decay"), "weight_decay");
        }
        if (t.contains("steps")) cfg.train.steps = as_index(t.at("steps"), "steps");
        if (t.contains("batch_size")) {
            cfg.train.batch_size = as_index(t.at("batch_size"), "batch_size");
        }
        if (t.contains("enin")) {
            const json& e = t.at("enin");
            require_keys(e, {"apply_probability", "beta_alpha", "patch_ratio",
                             "insertion_points", "eps"},
                         "enin");
            if (e.contains("apply_probability")) {
                cfg.train.enin.apply_probability =
                    as_number(e.at("apply_probability"), "apply_probability");
            }
            if (e.contains("beta_alpha")) {
                cfg.train.enin.beta_alpha = as_number(e.at("beta_alpha"), "beta_alpha");
            }
            if (e.contains("patch_ratio")) {
                cfg.train.enin.patch_ratio =
                    enin::parse_patch_ratio(as_string(e.at("patch_ratio"), "patch_ratio"));
            }
            if (e.contains("eps")) cfg.train.enin.eps = as_number(e.at("eps"), "eps");
            if (e.contains("insertion_points")) {
                const json& ip = e.at("insertion_points");
                if (!ip.is_array()) throw ConfigError("insertion_points must be an array");
                cfg.train.enin.insertion_points.clear();
                for (const json& v : ip) {
                    cfg.train.enin.insertion_points.push_back(int(as_index(v, "insertion point")));
                }
            }
        }
    }
    if (j.contains("hoper")) {
        const json& h = j.at("hoper");
        require_keys(h, {"homeo_threshold", "entropy_threshold", "capacity", "cp_lambda",
                         "patch_ratio", "eps"},
                     "hoper");
        if (h.contains("homeo_threshold")) {
            cfg.hoper.homeo_threshold = as_number(h.at("homeo_threshold"), "homeo_threshold");
        }
        if (h.contains("entropy_threshold")) {
            cfg.hoper.entropy_threshold = as_number(h.at("entropy_threshold"), "entropy_threshold");
        }
        if (h.contains("capacity")) cfg.hoper.capacity = as_index(h.at("capacity"), "capacity");
        if (h.contains("cp_lambda")) {
            hoper::set_cp_lambda(cfg.hoper, as_string(h.at("cp_lambda"), "cp_lambda"));
        }
        if (h.contains("patch_ratio")) {
            cfg.hoper.patch_ratio =
                enin::parse_patch_ratio(as_string(h.at("patch_ratio"), "patch_ratio"));
        }
        if (h.contains("eps")) cfg.hoper.eps = as_number(h.at("eps"), "eps");
    }
    if (j.contains("data")) {
        const json& d = j.at("data");
        require_keys(d, {"classes", "per_domain", "seed", "domains"}, "data");
        if (d.contains("classes")) cfg.classes = as_index(d.at("classes"), "classes");
        if (d.contains("per_domain")) cfg.per_domain = as_index(d.at("per_domain"), "per_domain");
        if (d.contains("seed")) cfg.data_seed = as_index(d.at("seed"), "data seed");
        if (d.contains("domains")) {
            const json& doms = d.at("domains");
            if (!doms.is_array()) throw ConfigError("data.domains must be an array");
            cfg.domains.clear();
            for (const json& v : doms) cfg.domains.push_back(domain_from_json(v));
        }
    }
    return cfg;
}

ExperimentConfig config_from_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NotFoundError("no such config file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return config_from_json(buf.str());
}

void cmd_gen_data(const ExperimentConfig& cfg) {
    require(!cfg.out_dir.empty(), "gen-data requires an output directory (--out)");
    const auto specs = cfg.domains.empty() ? datagen::default_domain_specs() : cfg.domains;
    const auto data = datagen::generate(specs, cfg.classes, cfg.per_domain, cfg.data_seed);
    datagen::write_dataset(cfg.out_dir, data);
}

void cmd_train(const ExperimentConfig& cfg) {
    require(!cfg.dataset_dir.empty(), "train requires a dataset (--dataset)");
    require(!cfg.out_dir.empty(), "train requires an output directory (--out)");
    require(cfg.target_domain != 0, "train requires a target domain (--target-domain)");
    const auto data = datagen::read_dataset(cfg.dataset_dir);
    const auto split = datagen::leave_one_out(data, cfg.target_domain);
    MetricsLog log;
    for (std::uint64_t seed : cfg.seeds) {
        std::vector<double> losses;
        const nnet::ConvNet model =
            train_model(split.source, cfg.method, cfg.train, seed, &losses);
        const std::string dir = seed_dir(cfg, seed);
        atomic_file((fs::path(dir) / "model.ipnn").string(),
                    [&](const std::string& tmp) { nnet::save_model(tmp, model); });
        for (std::size_t i = 0; i < losses.size(); ++i) {
            if ((i + 1) % 50 == 0 || i + 1 == losses.size()) {
                log.add("train", std::int64_t(seed), cfg.target_domain, method_name(cfg.method),
                        "train_loss_step_" + std::to_string(i + 1), losses[i]);
            }
        }
        log.add("train", std::int64_t(seed), cfg.target_domain, method_name(cfg.method),
                "source_size", double(split.source.size()));
    }
    log.write_file((fs::path(cfg.out_dir) / "metrics.jsonl").string());
}

void cmd_adapt(const ExperimentConfig& cfg) {
    require(!cfg.dataset_dir.empty(), "adapt requires a dataset (--dataset)");
    require(!cfg.out_dir.empty(), "adapt requires an output directory (--out)");
    require(cfg.target_domain != 0, "adapt requires a target domain (--target-domain)");
    if (cfg.method != Method::kInper && cfg.method != Method::kInperNoHomeo) {
        throw ConfigError("adapt requires method inper or inper-no-homeoscore");
    }
    const auto data = datagen::read_dataset(cfg.dataset_dir);
    const auto split = datagen::leave_one_out(data, cfg.target_domain);
    MetricsLog log;
    for (std::uint64_t seed : cfg.seeds) {
        const nnet::ConvNet model = nnet::load_model(resolve_model_path(cfg, seed));
        const AdaptOutcome outcome =
            adapt_and_eval(model, split.target, cfg.hoper, cfg.method, seed);
        const std::string dir = seed_dir(cfg, seed);

        atomic_file((fs::path(dir) / "bank.ipbk").string(), [&](const std::string& tmp) {
            hoper::save_bank(tmp, outcome.result.bank);
        });
        {
            const std::size_t n = outcome.result.predictions.size();
            std::vector<double> preds(n);
            for (std::size_t i = 0; i < n; ++i) {
                preds[i] = double(outcome.result.predictions[i] + 1);  // 1..K on disk
            }
            atomic_file((fs::path(dir) / "predictions.tdf").string(),
                        [&](const std::string& tmp) {
                            datagen::write_tdf(tmp, Tensor({n}, std::move(preds)));
                        });
        }
        atomic_file((fs::path(dir) / "adaptation.jsonl").string(), [&](const std::string& tmp) {
            std::ofstream os(tmp, std::ios::binary);
            if (!os) throw FormatError("cannot open '" + tmp + "' for writing");
            for (std::size_t i = 0; i < outcome.result.records.size(); ++i) {
                const auto& rec = outcome.result.records[i];
                json line;
                line["index"] = i;
                line["label"] = outcome.stream_labels[i];
                line["pseudo_label"] = rec.pseudo_label + 1;
                line["prediction"] = outcome.result.predictions[i] + 1;
                line["score"] = rec.score;
                line["admitted"] = rec.admitted;
                os << line.dump() << '\n';
            }
            os.flush();
            if (!os) throw FormatError("write failed for '" + tmp + "'");
        });

        const auto name = method_name(cfg.method);
        log.add("adapt", std::int64_t(seed), cfg.target_domain, name, "target_accuracy",
                outcome.accuracy);
        std::size_t admitted = 0;
        std::vector<double> correct_scores, incorrect_scores;
        for (std::size_t i = 0; i < outcome.result.records.size(); ++i) {
            const auto& rec = outcome.result.records[i];
            admitted += rec.admitted ? 1 : 0;
            (rec.pseudo_label + 1 == outcome.stream_labels[i] ? correct_scores : incorrect_scores)
                .push_back(rec.score);
        }
        const double n = double(std::max<std::size_t>(1, outcome.result.records.size()));
        log.add("adapt", std::int64_t(seed), cfg.target_domain, name, "admitted_fraction",
                double(admitted) / n);
        if (!correct_scores.empty()) {
            log.add("adapt", std::int64_t(seed), cfg.target_domain, name,
                    "homeo_score_correct_mean", aggregate(correct_scores).mean);
        }
        if (!incorrect_scores.empty()) {
            log.add("adapt", std::int64_t(seed), cfg.target_domain, name,
                    "homeo_score_incorrect_mean", aggregate(incorrect_scores).mean);
        }
    }
    log.write_file((fs::path(cfg.out_dir) / "metrics.jsonl").string());
}

void cmd_eval(const ExperimentConfig& cfg) {
    require(!cfg.dataset_dir.empty(), "eval requires a dataset (--dataset)");
    require(!cfg.out_dir.empty(), "eval requires an output directory (--out)");
    const auto data = datagen::read_dataset(cfg.dataset_dir);
    std::set<std::size_t> domain_ids(data.domains.begin(), data.domains.end());

    MetricsLog log;
    std::vector<std::string> metric_order;
    std::map<std::string, std::vector<double>> by_metric;
    auto emit = [&](std::uint64_t seed, const std::string& metric, double value) {
        log.add("eval", std::int64_t(seed), cfg.target_domain, method_name(cfg.method), metric,
                value);
        if (!by_metric.count(metric)) metric_order.push_back(metric);
        by_metric[metric].push_back(value);
    };

    for (std::uint64_t seed : cfg.seeds) {
        const nnet::ConvNet model = nnet::load_model(resolve_model_path(cfg, seed));
        for (std::size_t id : domain_ids) {
            std::vector<std::size_t> rows;
            for (std::size_t i = 0; i < data.size(); ++i) {
                if (data.domains[i] == id) rows.push_back(i);
            }
            // Build a single-domain view and score the head on it.
            datagen::DomainDataset part;
            const std::size_t stride = data.images.numel() / data.images.extent(0);
            std::vector<double> vals;
            vals.reserve(rows.size() * stride);
            for (std::size_t r : rows) {
                vals.insert(vals.end(), data.images.data() + r * stride,
                            data.images.data() + (r + 1) * stride);
                part.labels.push_back(data.labels[r]);
                part.domains.push_back(data.domains[r]);
            }
            part.images = Tensor({rows.size(), data.images.extent(1), data.images.extent(2),
                                  data.images.extent(3)},
                                 std::move(vals));
            emit(seed, "head_accuracy_domain_" + std::to_string(id),
                 evaluate_head(model, part));
        }
        emit(seed, "head_accuracy_overall", evaluate_head(model, data));
    }
    for (const std::string& metric : metric_order) {
        const Aggregate a = aggregate(by_metric[metric]);
        log.add("eval", -1, cfg.target_domain, method_name(cfg.method), metric + "_mean", a.mean);
        log.add("eval", -1, cfg.target_domain, method_name(cfg.method), metric + "_std", a.std);
    }
    log.write_file((fs::path(cfg.out_dir) / "metrics.jsonl").string());
}

void cmd_dump_embeddings(const ExperimentConfig& cfg) {
    require(!cfg.dataset_dir.empty(), "dump-embeddings requires a dataset (--dataset)");
    require(!cfg.out_dir.empty(), "dump-embeddings requires an output directory (--out)");
    const auto data = datagen::read_dataset(cfg.dataset_dir);
    const nnet::ConvNet model = nnet::load_model(resolve_model_path(cfg, cfg.seeds.front()));
    const Tensor embeddings = embed_split(model, data);
    auto as_f32 = [](const std::vector<std::size_t>& v) {
        std::vector<double> d(v.begin(), v.end());
        return Tensor({v.size()}, std::move(d));
    };
    atomic_file((fs::path(cfg.out_dir) / "embeddings.tdf").string(),
                [&](const std::string& tmp) { datagen::write_tdf(tmp, embeddings); });
    atomic_file((fs::path(cfg.out_dir) / "embedding_labels.tdf").string(),
                [&](const std::string& tmp) { datagen::write_tdf(tmp, as_f32(data.labels)); });
    atomic_file((fs::path(cfg.out_dir) / "embedding_domains.tdf").string(),
                [&](const std::string& tmp) { datagen::write_tdf(tmp, as_f32(data.domains)); });
}

}  // namespace inper::experiment
