#include "inper/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "inper/io_le.hpp"

namespace inper::nnet {

ConvNet::ConvNet(std::size_t num_classes, std::size_t input_channels)
    : in_channels(input_channels), classes(num_classes) {
    if (num_classes < 2) throw ConfigError("the classifier needs at least two classes");
    if (input_channels == 0) throw ConfigError("the input needs at least one channel");
    std::size_t prev = in_channels;
    for (std::size_t i = 0; i < 3; ++i) {
        conv_w[i] = Tensor::zeros({kBlockWidths[i], prev, 3, 3});
        conv_b[i] = Tensor::zeros({kBlockWidths[i]});
        gconv_w[i] = Tensor::zeros(conv_w[i].shape());
        gconv_b[i] = Tensor::zeros(conv_b[i].shape());
        prev = kBlockWidths[i];
    }
    head_w = Tensor::zeros({kBlockWidths[2], classes});
    ghead_w = Tensor::zeros(head_w.shape());
}

void ConvNet::zero_grad() {
    for (std::size_t i = 0; i < 3; ++i) {
        std::fill_n(gconv_w[i].data(), gconv_w[i].numel(), 0.0);
        std::fill_n(gconv_b[i].data(), gconv_b[i].numel(), 0.0);
    }
    std::fill_n(ghead_w.data(), ghead_w.numel(), 0.0);
}

void ConvNet::init_kaiming(RngStream& rng) {
    for (std::size_t i = 0; i < 3; ++i) {
        const double fan_in = double(conv_w[i].extent(1) * 9);
        const double bound = std::sqrt(6.0 / fan_in);
        for (std::size_t j = 0; j < conv_w[i].numel(); ++j) {
            conv_w[i][j] = rng.uniform(-bound, bound);
        }
        std::fill_n(conv_b[i].data(), conv_b[i].numel(), 0.0);
    }
    const double bound = std::sqrt(6.0 / double(head_w.extent(0)));
    for (std::size_t j = 0; j < head_w.numel(); ++j) head_w[j] = rng.uniform(-bound, bound);
}

std::vector<ParamRef> parameters(ConvNet& model) {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < 3; ++i) {
        const std::string stage = "conv" + std::to_string(i);
        out.push_back({stage + ".w", &model.conv_w[i], &model.gconv_w[i]});
        out.push_back({stage + ".b", &model.conv_b[i], &model.gconv_b[i]});
    }
    out.push_back({"head.w", &model.head_w, &model.ghead_w});
    return out;
}

Tensor conv3x3(const Tensor& in, const Tensor& w, const Tensor& b) {
    if (in.rank() != 4) throw ShapeError("conv3x3 expects input [N,C,H,W]");
    if (w.rank() != 4 || w.extent(2) != 3 || w.extent(3) != 3 || w.extent(1) != in.extent(1)) {
        throw ShapeError("conv3x3 weights must be [Co,Ci,3,3] matching the input channels");
    }
    if (b.rank() != 1 || b.extent(0) != w.extent(0)) {
        throw ShapeError("conv3x3 bias must be [Co]");
    }
    const std::size_t n = in.extent(0), ci = in.extent(1), h = in.extent(2), x_w = in.extent(3);
    const std::size_t co = w.extent(0);
    Tensor out = Tensor::zeros({n, co, h, x_w});
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t o = 0; o < co; ++o) {
            double* op = out.data() + (s * co + o) * h * x_w;
            std::fill_n(op, h * x_w, b[o]);
            for (std::size_t c = 0; c < ci; ++c) {
                const double* ip = in.data() + (s * ci + c) * h * x_w;
                const double* wp = w.data() + (o * ci + c) * 9;
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::size_t y0 = ky == 0 ? 1 : 0;
                    const std::size_t y1 = ky == 2 ? h - 1 : h;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const double wv = wp[ky * 3 + kx];
                        const std::size_t x0 = kx == 0 ? 1 : 0;
                        const std::size_t x1 = kx == 2 ? x_w - 1 : x_w;
                        for (std::size_t y = y0; y < y1; ++y) {
                            const double* ir = ip + (y + ky - 1) * x_w;
                            double* orow = op + y * x_w;
                            for (std::size_t x = x0; x < x1; ++x) {
                                orow[x] += wv * ir[x + kx - 1];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

void conv3x3_backward(const Tensor& in, const Tensor& w, const Tensor& dout, Tensor& din,
                      Tensor& gw, Tensor& gb) {
    const std::size_t n = in.extent(0), ci = in.extent(1), h = in.extent(2), x_w = in.extent(3);
    const std::size_t co = w.extent(0);
    if (dout.rank() != 4 || dout.extent(0) != n || dout.extent(1) != co ||
        dout.extent(2) != h || dout.extent(3) != x_w) {
        throw ShapeError("conv3x3_backward gradient shape mismatch");
    }
    din = Tensor::zeros(in.shape());
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t o = 0; o < co; ++o) {
            const double* dp = dout.data() + (s * co + o) * h * x_w;
            double acc_b = 0.0;
            for (std::size_t i = 0; i < h * x_w; ++i) acc_b += dp[i];
            gb[o] += acc_b;
            for (std::size_t c = 0; c < ci; ++c) {
                const double* ip = in.data() + (s * ci + c) * h * x_w;
                double* dip = din.data() + (s * ci + c) * h * x_w;
                const double* wp = w.data() + (o * ci + c) * 9;
                double* gwp = gw.data() + (o * ci + c) * 9;
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::size_t y0 = ky == 0 ? 1 : 0;
                    const std::size_t y1 = ky == 2 ? h - 1 : h;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const double wv = wp[ky * 3 + kx];
                        const std::size_t x0 = kx == 0 ? 1 : 0;
                        const std::size_t x1 = kx == 2 ? x_w - 1 : x_w;
                        double acc_w = 0.0;
                        for (std::size_t y = y0; y < y1; ++y) {
                            const double* drow = dp + y * x_w;
                            const double* irow = ip + (y + ky - 1) * x_w;
                            double* dirow = dip + (y + ky - 1) * x_w;
                            for (std::size_t x = x0; x < x1; ++x) {
                                acc_w += drow[x] * irow[x + kx - 1];
                                dirow[x + kx - 1] += wv * drow[x];
                            }
                        }
                        gwp[ky * 3 + kx] += acc_w;
                    }
                }
            }
        }
    }
}

Tensor avgpool2(const Tensor& in) {
    if (in.rank() != 4 || in.extent(2) % 2 != 0 || in.extent(3) % 2 != 0) {
        throw ShapeError("avgpool2 expects [N,C,H,W] with even spatial extents");
    }
    const std::size_t n = in.extent(0), c = in.extent(1), h = in.extent(2), w = in.extent(3);
    const std::size_t oh = h / 2, ow = w / 2;
    Tensor out = Tensor::zeros({n, c, oh, ow});
    for (std::size_t p = 0; p < n * c; ++p) {
        const double* ip = in.data() + p * h * w;
        double* op = out.data() + p * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
            const double* r0 = ip + 2 * y * w;
            const double* r1 = r0 + w;
            for (std::size_t x = 0; x < ow; ++x) {
                op[y * ow + x] = 0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
            }
        }
    }
    return out;
}

Tensor avgpool2_backward(const Tensor& dout) {
    if (dout.rank() != 4) throw ShapeError("avgpool2_backward expects [N,C,h,w]");
    const std::size_t n = dout.extent(0), c = dout.extent(1);
    const std::size_t oh = dout.extent(2), ow = dout.extent(3);
    Tensor din = Tensor::zeros({n, c, oh * 2, ow * 2});
    for (std::size_t p = 0; p < n * c; ++p) {
        const double* dp = dout.data() + p * oh * ow;
        double* ip = din.data() + p * oh * ow * 4;
        for (std::size_t y = 0; y < oh; ++y) {
            double* r0 = ip + 2 * y * ow * 2;
            double* r1 = r0 + ow * 2;
            for (std::size_t x = 0; x < ow; ++x) {
                const double v = 0.25 * dp[y * ow + x];
                r0[2 * x] = v;
                r0[2 * x + 1] = v;
                r1[2 * x] = v;
                r1[2 * x + 1] = v;
            }
        }
    }
    return din;
}

namespace {

std::vector<int> canonical_points(const enin::EnInConfig& cfg) {
    std::vector<int> points = cfg.insertion_points;
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    for (int p : points) {
        if (p < 0 || p > 2) {
            throw ConfigError("enin insertion points must name stages 0..2");
        }
    }
    return points;
}

}  // namespace

ForwardResult forward(const ConvNet& model, const Tensor& batch, Mode mode,
                      const EnInContext* ctx, ForwardCache* cache) {
    if (batch.rank() != 4 || batch.extent(1) != model.in_channels) {
        throw ShapeError("forward expects a batch [N,in_channels,H,W]");
    }
    if (batch.extent(2) % 4 != 0 || batch.extent(3) % 4 != 0) {
        throw ShapeError("forward needs spatial extents divisible by 4");
    }
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.valid = false;
    c.enin_apps.clear();

    const bool enin_on = mode == Mode::kTrain && ctx != nullptr;
    std::vector<int> points;
    if (enin_on) {
        points = canonical_points(ctx->cfg);
        if (ctx->frozen) {
            if (ctx->apps.size() != points.size()) {
                throw UsageError("frozen enin context does not match the insertion points");
            }
        } else if (ctx->rng == nullptr) {
            throw UsageError("enin context needs a random stream unless frozen");
        }
    }

    Tensor x = batch;
    std::size_t applied = 0;
    for (int stage = 0; stage < 3; ++stage) {
        c.conv_in[stage] = x;
        Tensor z = conv3x3(x, model.conv_w[stage], model.conv_b[stage]);
        c.conv_out[stage] = z;
        Tensor a = z;
        for (std::size_t i = 0; i < a.numel(); ++i) {
            if (a[i] < 0.0) a[i] = 0.0;
        }
        if (stage < 2) a = avgpool2(a);
        if (enin_on && std::find(points.begin(), points.end(), stage) != points.end()) {
            enin::Application app;
            if (ctx->frozen) {
                app = ctx->apps[applied];
            } else {
                const enin::EntropyMask m =
                    enin::resize_mask(ctx->mask, a.extent(2), a.extent(3));
                app = enin::plan(a, m, ctx->cfg, *ctx->rng);
            }
            ++applied;
            a = enin::apply(a, app);
            c.enin_apps.emplace_back(stage, std::move(app));
        }
        c.stage_out[stage] = a;
        x = a;
    }

    const std::size_t n = x.extent(0), ch = x.extent(1);
    const std::size_t hw = x.extent(2) * x.extent(3);
    Tensor pooled = Tensor::zeros({n, ch});
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t f = 0; f < ch; ++f) {
            const double* fp = x.data() + (s * ch + f) * hw;
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += fp[i];
            pooled.at2(s, f) = acc / double(hw);
        }
    }
    const std::size_t k = model.classes;
    Tensor logits = Tensor::zeros({n, k});
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t f = 0; f < ch; ++f) {
                acc += pooled.at2(s, f) * model.head_w.at2(f, j);
            }
            logits.at2(s, j) = acc;
        }
    }

    c.final_features = x;
    c.pooled = pooled;
    c.logits = logits;
    c.valid = true;
    return {std::move(x), std::move(pooled), std::move(logits)};
}

LossResult cross_entropy_loss(const Tensor& logits, const std::vector<std::size_t>& labels) {
    if (logits.rank() != 2) throw ShapeError("cross_entropy_loss expects logits [N,K]");
    const std::size_t n = logits.extent(0), k = logits.extent(1);
    if (labels.size() != n) throw ShapeError("one label per logits row required");
    for (std::size_t label : labels) {
        if (label < 1 || label > k) {
            throw ValueError("labels must lie in 1.." + std::to_string(k));
        }
    }
    LossResult out;
    out.dlogits = Tensor::zeros({n, k});
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double* row = logits.data() + s * k;
        double mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        total += lse - row[labels[s] - 1];
        for (std::size_t j = 0; j < k; ++j) {
            out.dlogits.at2(s, j) = std::exp(row[j] - lse) / double(n);
        }
        out.dlogits.at2(s, labels[s] - 1) -= 1.0 / double(n);
    }
    out.loss = total / double(n);
    return out;
}

Tensor backward(ConvNet& model, const ForwardCache& cache, const Tensor& dlogits) {
    if (!cache.valid) throw UsageError("backward requires the cache of a completed forward");
    if (!dlogits.same_shape(cache.logits)) {
        throw ShapeError("dlogits shape does not match the cached logits");
    }
    const std::size_t n = dlogits.extent(0), k = dlogits.extent(1);
    const std::size_t ch = cache.pooled.extent(1);
    const std::size_t fh = cache.final_features.extent(2), fw = cache.final_features.extent(3);

    for (std::size_t f = 0; f < ch; ++f) {
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                acc += cache.pooled.at2(s, f) * dlogits.at2(s, j);
            }
            model.ghead_w.at2(f, j) += acc;
        }
    }
    Tensor dstage = Tensor::zeros(cache.final_features.shape());
    const double inv_hw = 1.0 / double(fh * fw);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t f = 0; f < ch; ++f) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                acc += dlogits.at2(s, j) * model.head_w.at2(f, j);
            }
            const double v = acc * inv_hw;
            double* dp = dstage.data() + (s * ch + f) * fh * fw;
            std::fill_n(dp, fh * fw, v);
        }
    }

    for (int stage = 2; stage >= 0; --stage) {
        for (const auto& [point, app] : cache.enin_apps) {
            if (point == stage) dstage = enin::backward(dstage, app);
        }
        if (stage < 2) dstage = avgpool2_backward(dstage);
        const Tensor& pre = cache.conv_out[stage];
        for (std::size_t i = 0; i < dstage.numel(); ++i) {
            if (pre[i] <= 0.0) dstage[i] = 0.0;
        }
        Tensor din;
        conv3x3_backward(cache.conv_in[stage], model.conv_w[stage], dstage, din,
                         model.gconv_w[stage], model.gconv_b[stage]);
        dstage = std::move(din);
    }
    return dstage;
}

void sgd_step(ConvNet& model, SgdState& state, double lr, double momentum, double weight_decay) {
    auto params = parameters(model);
    if (state.velocity.empty()) {
        for (const auto& p : params) state.velocity.push_back(Tensor::zeros(p.value->shape()));
    }
    if (state.velocity.size() != params.size()) {
        throw UsageError("optimizer state does not match the model parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& v = state.velocity[i];
        Tensor& p = *params[i].value;
        const Tensor& g = *params[i].grad;
        if (!v.same_shape(p)) throw UsageError("optimizer state shape mismatch");
        for (std::size_t j = 0; j < p.numel(); ++j) {
            v[j] = momentum * v[j] + g[j] + weight_decay * p[j];
            p[j] -= lr * v[j];
        }
    }
}

TrainResult train(ConvNet& model, const Tensor& images, const std::vector<std::size_t>& labels,
                  const TrainConfig& cfg) {
    if (images.rank() != 4) throw ShapeError("train expects images [N,C,H,W]");
    const std::size_t n = images.extent(0);
    if (labels.size() != n) throw ShapeError("one label per image required");
    if (n == 0) throw ValueError("training set must be nonempty");
    const std::size_t batch = std::min(cfg.batch_size, n);
    if (cfg.use_enin && batch < 2) {
        throw ConfigError("enin training needs a batch size of at least 2");
    }
    if (batch == 0) throw ConfigError("batch size must be positive");

    RngStream batch_rng(derive_seed(cfg.seed, "batch"));
    RngStream enin_rng(derive_seed(cfg.seed, "enin"));
    SgdState opt;
    TrainResult result;
    result.losses.reserve(cfg.steps);

    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    const std::size_t c = images.extent(1), h = images.extent(2), w = images.extent(3);
    Tensor bx = Tensor::zeros({batch, c, h, w});
    std::vector<std::size_t> by(batch);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        if (cursor + batch > order.size()) {
            order = batch_permutation(n, batch_rng);
            cursor = 0;
        }
        for (std::size_t j = 0; j < batch; ++j) {
            const std::size_t idx = order[cursor + j];
            set_sample(bx, j, slice_sample(images, idx));
            by[j] = labels[idx];
        }
        cursor += batch;

        model.zero_grad();
        ForwardCache cache;
        if (cfg.use_enin) {
            // Gradient-free pass to obtain the entropy mask of this batch.
            const ForwardResult plain = forward(model, bx, Mode::kEval);
            EnInContext ctx;
            ctx.mask = enin::entropy_mask(plain.final_features, model.head_w);
            ctx.cfg = cfg.enin;
            ctx.rng = &enin_rng;
            forward(model, bx, Mode::kTrain, &ctx, &cache);
        } else {
            forward(model, bx, Mode::kTrain, nullptr, &cache);
        }
        const LossResult loss = cross_entropy_loss(cache.logits, by);
        backward(model, cache, loss.dlogits);
        const double lr =
            cfg.learning_rate * 0.5 *
            (1.0 + std::cos(3.14159265358979323846 * double(step) / double(cfg.steps)));
        sgd_step(model, opt, lr, cfg.momentum, cfg.weight_decay);
        result.losses.push_back(loss.loss);
    }
    return result;
}

void write_model(std::ostream& os, const ConvNet& model) {
    io::write_magic(os, "IPNN");
    io::write_u16(os, 1);
    io::write_u32(os, std::uint32_t(model.classes));
    io::write_u32(os, std::uint32_t(model.in_channels));
    ConvNet& mutable_model = const_cast<ConvNet&>(model);
    const auto params = parameters(mutable_model);
    io::write_u32(os, std::uint32_t(params.size()));
    for (const auto& p : params) {
        io::write_u8(os, std::uint8_t(p.name.size()));
        io::write_bytes(os, p.name.data(), p.name.size());
        io::write_u8(os, std::uint8_t(p.value->rank()));
        for (std::size_t d = 0; d < p.value->rank(); ++d) {
            io::write_u32(os, std::uint32_t(p.value->extent(d)));
        }
    }
    for (const auto& p : params) {
        for (std::size_t i = 0; i < p.value->numel(); ++i) {
            io::write_f32(os, float((*p.value)[i]));
        }
    }
}

ConvNet read_model(std::istream& is) {
    io::expect_magic(is, "IPNN", "model checkpoint");
    const std::uint16_t version = io::read_u16(is, "version");
    if (version != 1) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t classes = io::read_u32(is, "class count");
    const std::uint32_t in_channels = io::read_u32(is, "input channels");
    if (classes < 2 || in_channels == 0) throw FormatError("invalid checkpoint header");
    ConvNet model(classes, in_channels);
    const auto params = parameters(model);
    const std::uint32_t count = io::read_u32(is, "tensor count");
    if (count != params.size()) throw FormatError("checkpoint tensor count mismatch");
    for (const auto& p : params) {
        const std::uint8_t name_len = io::read_u8(is, "name length");
        std::string name(name_len, '\0');
        io::read_bytes(is, name.data(), name_len, "tensor name");
        if (name != p.name) throw FormatError("unexpected checkpoint tensor \"" + name + "\"");
        const std::uint8_t rank = io::read_u8(is, "rank");
        if (rank != p.value->rank()) throw FormatError("checkpoint rank mismatch for " + name);
        for (std::size_t d = 0; d < rank; ++d) {
            if (io::read_u32(is, "extent") != p.value->extent(d)) {
                throw FormatError("checkpoint shape mismatch for " + name);
            }
        }
    }
    for (const auto& p : params) {
        for (std::size_t i = 0; i < p.value->numel(); ++i) {
            (*p.value)[i] = io::read_f32(is, "parameter");
        }
    }
    return model;
}

void save_model(const std::string& path, const ConvNet& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open \"" + path + "\" for writing");
    write_model(os, model);
    os.flush();
    if (!os) throw FormatError("failed writing \"" + path + "\"");
}

ConvNet load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NotFoundError("cannot open model checkpoint \"" + path + "\"");
    return read_model(is);
}

}  // namespace inper::nnet
