#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "inper/enin.hpp"
#include "inper/tensor.hpp"

namespace inper::nnet {

inline constexpr std::array<std::size_t, 3> kBlockWidths{8, 16, 32};

/// Three conv->ReLU stages with 2x2 average pooling after the first two, a
/// global average pool and a bias-free linear head. A 32x32 input therefore
/// reaches the head as a 32-channel 8x8 map. Gradient tensors mirror the
/// parameter tensors shape for shape.
struct ConvNet {
    std::size_t in_channels = 3;
    std::size_t classes = 4;
    std::array<Tensor, 3> conv_w;  // [width_i, width_{i-1}, 3, 3]
    std::array<Tensor, 3> conv_b;  // [width_i]
    Tensor head_w;                 // [32, K]
    std::array<Tensor, 3> gconv_w, gconv_b;
    Tensor ghead_w;

    explicit ConvNet(std::size_t num_classes = 4, std::size_t input_channels = 3);
    std::size_t num_classes() const { return classes; }
    void zero_grad();
    /// Kaiming-uniform fan-in draws for weights, zero biases.
    void init_kaiming(RngStream& rng);
};

struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
};
std::vector<ParamRef> parameters(ConvNet& model);

enum class Mode { kTrain, kEval };

/// Carries the entropy mask of the gradient-free pass into the training
/// forward. When frozen, the recorded applications are replayed instead of
/// drawing fresh ones — the statistics then stay constant, which is what the
/// finite-difference gradient checks rely on.
struct EnInContext {
    enin::EntropyMask mask;  // computed at final-feature resolution
    enin::EnInConfig cfg;
    RngStream* rng = nullptr;
    bool frozen = false;
    std::vector<enin::Application> apps;  // ascending stage order when frozen
};

struct ForwardCache {
    bool valid = false;
    std::array<Tensor, 3> conv_in;   // stage inputs
    std::array<Tensor, 3> conv_out;  // pre-ReLU
    std::array<Tensor, 3> stage_out; // post pool and post intervention
    std::vector<std::pair<int, enin::Application>> enin_apps;  // ascending stage
    Tensor final_features;  // == stage_out[2]
    Tensor pooled;          // [N, 32]
    Tensor logits;          // [N, K]
};

struct ForwardResult {
    Tensor final_features;
    Tensor pooled;
    Tensor logits;
};

/// Input is [N, in_channels, H, W] with H and W divisible by 4. EnIn fires
/// only in train mode with a context present, at the configured stage
/// outputs (0, 1 and/or 2).
ForwardResult forward(const ConvNet& model, const Tensor& batch, Mode mode,
                      const EnInContext* ctx = nullptr, ForwardCache* cache = nullptr);

/// Mean negative log-softmax of the true class; labels are 1-based class ids.
/// dlogits = (softmax - onehot) / N.
struct LossResult {
    double loss = 0.0;
    Tensor dlogits;
};
LossResult cross_entropy_loss(const Tensor& logits, const std::vector<std::size_t>& labels);

/// Accumulates parameter gradients and returns d(loss)/d(input).
/// Throws UsageError unless the cache comes from a completed forward.
Tensor backward(ConvNet& model, const ForwardCache& cache, const Tensor& dlogits);

struct SgdState {
    std::vector<Tensor> velocity;  // aligned with parameters(model)
};

/// p <- p - lr * v with v <- momentum*v + grad + weight_decay*p.
void sgd_step(ConvNet& model, SgdState& state, double lr, double momentum, double weight_decay);

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::size_t steps = 400;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    bool use_enin = false;
    enin::EnInConfig enin;
};

struct TrainResult {
    std::vector<double> losses;  // one entry per step
};

/// Shuffled-epoch minibatch SGD with a cosine-decayed learning rate. With
/// EnIn enabled each step runs a gradient-free eval forward to obtain the
/// entropy mask, then the training forward with the interventions.
TrainResult train(ConvNet& model, const Tensor& images, const std::vector<std::size_t>& labels,
                  const TrainConfig& cfg);

/// Standalone layer kernels, exposed for oracle tests.
Tensor conv3x3(const Tensor& in, const Tensor& w, const Tensor& b);  // pad 1, stride 1
void conv3x3_backward(const Tensor& in, const Tensor& w, const Tensor& dout, Tensor& din,
                      Tensor& gw, Tensor& gb);
Tensor avgpool2(const Tensor& in);
Tensor avgpool2_backward(const Tensor& dout);

/// Checkpoint, magic "IPNN": version u16, u32 class and input-channel counts,
/// u32 tensor count, a shape table (u8 name length, name, u8 rank, u32
/// extents), then all payloads as f32 little-endian in table order.
void write_model(std::ostream& os, const ConvNet& model);
ConvNet read_model(std::istream& is);
void save_model(const std::string& path, const ConvNet& model);
ConvNet load_model(const std::string& path);

}  // namespace inper::nnet
