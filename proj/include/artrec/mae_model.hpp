#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "artrec/masking.hpp"
#include "artrec/sequence.hpp"

namespace artrec {

/// Architecture and optimisation settings. Every field is echoed into
/// saved artifacts.
struct ModelConfig {
    int n_mask = 3;
    std::vector<int> dilation_rates = {1, 2, 4};
    int mixing_width = 128;
    int recurrent_layers = 2;
    int recurrent_width = 128;
    double learning_rate = 1e-3;
    int batch_size = 64;
    int patience = 50;
    int max_epochs = 1000;
    std::uint64_t seed = 0;
    /// Draw an independent plan for every frame instead of one per batch.
    bool per_sample_masking = false;

    bool operator==(const ModelConfig&) const = default;
};

/// Throws Error when a width or count is not positive or n_mask is outside 1..8.
void validate(const ModelConfig& config);

// ============================================================================
// Parameters
// ============================================================================

/// Output at step t is tanh(x[t-d] W_prev + x[t] W_mid + x[t+d] W_next + b),
/// with zeros outside the sequence.
template <class S>
struct MixingLayer {
    int dilation = 1;
    Mat<S> w_prev, w_mid, w_next, bias;
};

/// Gated recurrent unit, gate blocks ordered [update | reset | candidate].
/// The reset gate multiplies the hidden projection after the matrix product.
template <class S>
struct GruDirection {
    Mat<S> w_input;   // in x 3h
    Mat<S> w_hidden;  // h x 3h
    Mat<S> b_input;   // 1 x 3h
    Mat<S> b_hidden;  // 1 x 3h
};

template <class S>
struct BiGruLayer {
    GruDirection<S> forward;
    GruDirection<S> backward;
};

template <class S>
struct Readout {
    Mat<S> weight;  // 2h x 16
    Mat<S> bias;    // 1 x 16
};

template <class S>
struct BasicModelParams {
    std::vector<MixingLayer<S>> mixing;
    std::vector<BiGruLayer<S>> recurrent;
    Readout<S> readout;
    Mat<S> mask_token;  // 1 x 16

    /// Same shapes, all zeros.
    BasicModelParams zeros_like() const;

    template <class Other>
    BasicModelParams<Other> cast() const;
};

using ModelParams = BasicModelParams<float>;

/// Calls f(name, tensor) for every trainable tensor in a fixed order.
template <class P, class F>
void visit_tensors(P& params, F&& f) {
    for (std::size_t i = 0; i < params.mixing.size(); ++i) {
        auto& m = params.mixing[i];
        const auto base = "mixing." + std::to_string(i) + ".";
        f(base + "w_prev", m.w_prev);
        f(base + "w_mid", m.w_mid);
        f(base + "w_next", m.w_next);
        f(base + "bias", m.bias);
    }
    for (std::size_t i = 0; i < params.recurrent.size(); ++i) {
        auto& layer = params.recurrent[i];
        for (int dir = 0; dir < 2; ++dir) {
            auto& g = dir == 0 ? layer.forward : layer.backward;
            const auto base = "gru." + std::to_string(i) + (dir == 0 ? ".fwd." : ".bwd.");
            f(base + "w_input", g.w_input);
            f(base + "w_hidden", g.w_hidden);
            f(base + "b_input", g.b_input);
            f(base + "b_hidden", g.b_hidden);
        }
    }
    f(std::string("readout.weight"), params.readout.weight);
    f(std::string("readout.bias"), params.readout.bias);
    f(std::string("mask_token"), params.mask_token);
}

template <class S>
std::size_t parameter_count(const BasicModelParams<S>& params) {
    std::size_t n = 0;
    visit_tensors(params, [&](const std::string&, const Mat<S>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

/// Glorot-uniform weights, zero biases, zero mask token. Deterministic in seed.
template <class S>
BasicModelParams<S> init_params(const ModelConfig& config, std::uint64_t seed);

inline ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
    return init_params<float>(config, seed);
}

// ============================================================================
// Layers
// ============================================================================

template <class S>
Mat<S> mixing_forward(const MixingLayer<S>& layer, const Mat<S>& x, int batch);
/// Returns d(loss)/dx and accumulates parameter gradients into grad.
template <class S>
Mat<S> mixing_backward(const MixingLayer<S>& layer, const Mat<S>& x, const Mat<S>& y, const Mat<S>& dy, int batch,
                       MixingLayer<S>& grad);

template <class S>
struct GruCache {
    Mat<S> hidden;     // outputs, time order, (T*B) x h
    Mat<S> update;     // z
    Mat<S> reset;      // r
    Mat<S> candidate;  // n
    Mat<S> hidden_proj_candidate;  // h_prev W_hn + b_hn
};

template <class S>
Mat<S> gru_forward(const GruDirection<S>& gru, const Mat<S>& x, int batch, int steps, bool reverse,
                   GruCache<S>* cache);
template <class S>
Mat<S> gru_backward(const GruDirection<S>& gru, const GruCache<S>& cache, const Mat<S>& x, const Mat<S>& dh_out,
                    int batch, int steps, bool reverse, GruDirection<S>& grad);

template <class S>
Mat<S> readout_forward(const Readout<S>& readout, const Mat<S>& x);
template <class S>
Mat<S> readout_backward(const Readout<S>& readout, const Mat<S>& x, const Mat<S>& dy, Readout<S>& grad);

// ============================================================================
// Model
// ============================================================================

template <class S>
struct ForwardCache {
    std::vector<Mat<S>> activations;  // input of every layer, then the readout input
    std::vector<GruCache<S>> gru;     // two per recurrent layer
};

/// Full stack on an already-masked batch with 16 channels.
template <class S>
SequenceBatch<S> forward(const BasicModelParams<S>& params, const SequenceBatch<S>& input,
                         ForwardCache<S>* cache = nullptr);

/// Back-propagates d(loss)/d(output); accumulates into grads and returns
/// d(loss)/d(input).
template <class S>
Mat<S> backward(const BasicModelParams<S>& params, const ForwardCache<S>& cache, const Mat<S>& d_output,
                int batch, int steps, BasicModelParams<S>& grads);

/// Mean absolute difference over every entry.
template <class S>
S mae_loss(const Mat<S>& pred, const Mat<S>& target);

/// Sub-gradient of mae_loss with respect to pred (zero where equal).
template <class S>
Mat<S> mae_loss_grad(const Mat<S>& pred, const Mat<S>& target);

/// Masks `clean` with the plan(s), runs the model and returns the MAE
/// against `clean`. One plan applies to the whole batch; otherwise one per
/// sequence. When grads is non-null, gradients (mask token included) are
/// accumulated into it.
template <class S>
S masked_loss(const BasicModelParams<S>& params, const SequenceBatch<S>& clean, std::span<const MaskPlan> plans,
              BasicModelParams<S>* grads);

/// Copy of clean with per-sequence or shared plans applied.
template <class S>
SequenceBatch<S> mask_batch(const SequenceBatch<S>& clean, std::span<const MaskPlan> plans, const Mat<S>& token);

// ============================================================================
// Gradient checking
// ============================================================================

struct GradCheckOptions {
    double epsilon = 1e-5;
    int samples = 120;
    /// Below this magnitude both gradients are compared absolutely.
    double absolute_floor = 1e-6;
    std::uint64_t seed = 7;
};

/// Max relative error between analytic gradients of masked_loss and central
/// finite differences over a random subsample of parameters.
double grad_check(const BasicModelParams<double>& params, const SequenceBatch<double>& clean, const MaskPlan& plan,
                  const GradCheckOptions& options = {});

enum class GradCheckTarget { Mixing, Recurrent, Readout, MaskToken, FullStack };

/// Builds a tiny random problem isolating one layer type and checks it.
double grad_check_layer(GradCheckTarget target, const GradCheckOptions& options = {});

}  // namespace artrec
