#include "artrec/mae_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

namespace artrec {

void validate(const ModelConfig& c) {
    auto fail = [](const std::string& what) { throw Error("invalid model config: " + what); };
    if (c.n_mask < 1 || c.n_mask > kNumPellets) fail("n_mask must be in 1..8");
    if (c.dilation_rates.empty()) fail("dilation_rates must not be empty");
    for (int d : c.dilation_rates) {
        if (d < 1) fail("dilation rates must be positive");
    }
    if (c.mixing_width < 1) fail("mixing_width must be positive");
    if (c.recurrent_layers < 1) fail("recurrent_layers must be positive");
    if (c.recurrent_width < 1) fail("recurrent_width must be positive");
    if (!(c.learning_rate > 0.0)) fail("learning_rate must be positive");
    if (c.batch_size < 1) fail("batch_size must be positive");
    if (c.patience < 1) fail("patience must be at least 1");
    if (c.max_epochs < 1) fail("max_epochs must be positive");
}

// ============================================================================
// Parameters
// ============================================================================

template <class S>
BasicModelParams<S> BasicModelParams<S>::zeros_like() const {
    BasicModelParams<S> out = *this;
    visit_tensors(out, [](const std::string&, Mat<S>& m) { m.setZero(); });
    return out;
}

template <class S>
template <class Other>
BasicModelParams<Other> BasicModelParams<S>::cast() const {
    BasicModelParams<Other> out;
    out.mixing.resize(mixing.size());
    out.recurrent.resize(recurrent.size());
    for (std::size_t i = 0; i < mixing.size(); ++i) out.mixing[i].dilation = mixing[i].dilation;
    std::vector<const Mat<S>*> src;
    visit_tensors(*this, [&](const std::string&, const Mat<S>& m) { src.push_back(&m); });
    std::size_t k = 0;
    visit_tensors(out, [&](const std::string&, Mat<Other>& m) { m = src[k++]->template cast<Other>(); });
    return out;
}

namespace {

template <class S>
Mat<S> glorot(Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Mat<S> m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<S>(dist(rng));
    }
    return m;
}

template <class S>
GruDirection<S> init_gru(int in, int h, Rng& rng) {
    GruDirection<S> g;
    g.w_input = glorot<S>(in, 3 * h, in, h, rng);
    g.w_hidden = glorot<S>(h, 3 * h, h, h, rng);
    g.b_input = Mat<S>::Zero(1, 3 * h);
    g.b_hidden = Mat<S>::Zero(1, 3 * h);
    return g;
}

}  // namespace

template <class S>
BasicModelParams<S> init_params(const ModelConfig& config, std::uint64_t seed) {
    validate(config);
    Rng rng(seed);
    BasicModelParams<S> p;
    int width = kNumChannels;
    for (int d : config.dilation_rates) {
        MixingLayer<S> m;
        m.dilation = d;
        const int out = config.mixing_width;
        m.w_prev = glorot<S>(width, out, 3.0 * width, out, rng);
        m.w_mid = glorot<S>(width, out, 3.0 * width, out, rng);
        m.w_next = glorot<S>(width, out, 3.0 * width, out, rng);
        m.bias = Mat<S>::Zero(1, out);
        p.mixing.push_back(std::move(m));
        width = out;
    }
    const int h = config.recurrent_width;
    for (int i = 0; i < config.recurrent_layers; ++i) {
        BiGruLayer<S> layer;
        layer.forward = init_gru<S>(width, h, rng);
        layer.backward = init_gru<S>(width, h, rng);
        p.recurrent.push_back(std::move(layer));
        width = 2 * h;
    }
    p.readout.weight = glorot<S>(width, kNumChannels, width, kNumChannels, rng);
    p.readout.bias = Mat<S>::Zero(1, kNumChannels);
    p.mask_token = Mat<S>::Zero(1, kNumChannels);
    return p;
}

// ============================================================================
// Layers
// ============================================================================

template <class S>
Mat<S> mixing_forward(const MixingLayer<S>& layer, const Mat<S>& x, int batch) {
    const Eigen::Index n = x.rows();
    const Eigen::Index shift = static_cast<Eigen::Index>(layer.dilation) * batch;
    Mat<S> pre(n, layer.w_mid.cols());
    pre.noalias() = x * layer.w_mid;
    pre.rowwise() += layer.bias.row(0);
    if (shift < n) {
        const Eigen::Index m = n - shift;
        pre.bottomRows(m).noalias() += x.topRows(m) * layer.w_prev;
        pre.topRows(m).noalias() += x.bottomRows(m) * layer.w_next;
    }
    return pre.array().tanh().matrix();
}

template <class S>
Mat<S> mixing_backward(const MixingLayer<S>& layer, const Mat<S>& x, const Mat<S>& y, const Mat<S>& dy, int batch,
                       MixingLayer<S>& grad) {
    const Eigen::Index n = x.rows();
    const Eigen::Index shift = static_cast<Eigen::Index>(layer.dilation) * batch;
    const Mat<S> dpre = (dy.array() * (S(1) - y.array().square())).matrix();
    grad.w_mid.noalias() += x.transpose() * dpre;
    grad.bias += dpre.colwise().sum();
    Mat<S> dx(n, x.cols());
    dx.noalias() = dpre * layer.w_mid.transpose();
    if (shift < n) {
        const Eigen::Index m = n - shift;
        grad.w_prev.noalias() += x.topRows(m).transpose() * dpre.bottomRows(m);
        grad.w_next.noalias() += x.bottomRows(m).transpose() * dpre.topRows(m);
        dx.topRows(m).noalias() += dpre.bottomRows(m) * layer.w_prev.transpose();
        dx.bottomRows(m).noalias() += dpre.topRows(m) * layer.w_next.transpose();
    }
    return dx;
}

namespace {

template <class Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
    using S = typename Derived::Scalar;
    return S(1) / (S(1) + (-a).exp());
}

}  // namespace

template <class S>
Mat<S> gru_forward(const GruDirection<S>& gru, const Mat<S>& x, int batch, int steps, bool reverse,
                   GruCache<S>* cache) {
    const Eigen::Index h = gru.w_hidden.rows();
    const Eigen::Index n = static_cast<Eigen::Index>(batch) * steps;
    Mat<S> a(n, 3 * h);
    a.noalias() = x * gru.w_input;
    a.rowwise() += gru.b_input.row(0);

    Mat<S> hidden(n, h);
    if (cache) {
        cache->update.resize(n, h);
        cache->reset.resize(n, h);
        cache->candidate.resize(n, h);
        cache->hidden_proj_candidate.resize(n, h);
    }
    Mat<S> h_prev = Mat<S>::Zero(batch, h);
    Mat<S> g(batch, 3 * h);
    for (int s = 0; s < steps; ++s) {
        const int t = reverse ? steps - 1 - s : s;
        const Eigen::Index r0 = static_cast<Eigen::Index>(t) * batch;
        g.noalias() = h_prev * gru.w_hidden;
        g.rowwise() += gru.b_hidden.row(0);
        const auto at = a.middleRows(r0, batch);
        const Mat<S> z = sigmoid((at.leftCols(h) + g.leftCols(h)).array()).matrix();
        const Mat<S> r = sigmoid((at.middleCols(h, h) + g.middleCols(h, h)).array()).matrix();
        const Mat<S> cand = (at.rightCols(h).array() + r.array() * g.rightCols(h).array()).tanh().matrix();
        const Mat<S> h_new = ((S(1) - z.array()) * cand.array() + z.array() * h_prev.array()).matrix();
        hidden.middleRows(r0, batch) = h_new;
        if (cache) {
            cache->update.middleRows(r0, batch) = z;
            cache->reset.middleRows(r0, batch) = r;
            cache->candidate.middleRows(r0, batch) = cand;
            cache->hidden_proj_candidate.middleRows(r0, batch) = g.rightCols(h);
        }
        h_prev = h_new;
    }
    if (cache) cache->hidden = hidden;
    return hidden;
}

template <class S>
Mat<S> gru_backward(const GruDirection<S>& gru, const GruCache<S>& cache, const Mat<S>& x, const Mat<S>& dh_out,
                    int batch, int steps, bool reverse, GruDirection<S>& grad) {
    const Eigen::Index h = gru.w_hidden.rows();
    const Eigen::Index n = static_cast<Eigen::Index>(batch) * steps;
    Mat<S> da(n, 3 * h);
    Mat<S> carry = Mat<S>::Zero(batch, h);
    Mat<S> dg(batch, 3 * h);
    const Mat<S> zero_state = Mat<S>::Zero(batch, h);
    for (int s = steps - 1; s >= 0; --s) {
        const int t = reverse ? steps - 1 - s : s;
        const Eigen::Index r0 = static_cast<Eigen::Index>(t) * batch;
        const Eigen::Index prev_row =
            s == 0 ? -1 : static_cast<Eigen::Index>(reverse ? steps - s : s - 1) * batch;

        const auto z = cache.update.middleRows(r0, batch).array();
        const auto r = cache.reset.middleRows(r0, batch).array();
        const auto cand = cache.candidate.middleRows(r0, batch).array();
        const auto gn = cache.hidden_proj_candidate.middleRows(r0, batch).array();
        const Mat<S> h_prev = prev_row < 0 ? zero_state : Mat<S>(cache.hidden.middleRows(prev_row, batch));

        const Mat<S> dh = dh_out.middleRows(r0, batch) + carry;
        const auto dha = dh.array();
        const Mat<S> dcand_pre = (dha * (S(1) - z) * (S(1) - cand.square())).matrix();
        const Mat<S> dz_pre = (dha * (h_prev.array() - cand) * z * (S(1) - z)).matrix();
        const Mat<S> dr_pre = (dcand_pre.array() * gn * r * (S(1) - r)).matrix();

        auto da_t = da.middleRows(r0, batch);
        da_t.leftCols(h) = dz_pre;
        da_t.middleCols(h, h) = dr_pre;
        da_t.rightCols(h) = dcand_pre;

        dg.leftCols(h) = dz_pre;
        dg.middleCols(h, h) = dr_pre;
        dg.rightCols(h) = (dcand_pre.array() * r).matrix();

        grad.w_hidden.noalias() += h_prev.transpose() * dg;
        grad.b_hidden += dg.colwise().sum();
        carry = (dha * z).matrix();
        carry.noalias() += dg * gru.w_hidden.transpose();
    }
    grad.w_input.noalias() += x.transpose() * da;
    grad.b_input += da.colwise().sum();
    Mat<S> dx(n, x.cols());
    dx.noalias() = da * gru.w_input.transpose();
    return dx;
}

template <class S>
Mat<S> readout_forward(const Readout<S>& readout, const Mat<S>& x) {
    Mat<S> y(x.rows(), readout.weight.cols());
    y.noalias() = x * readout.weight;
    y.rowwise() += readout.bias.row(0);
    return y;
}

template <class S>
Mat<S> readout_backward(const Readout<S>& readout, const Mat<S>& x, const Mat<S>& dy, Readout<S>& grad) {
    grad.weight.noalias() += x.transpose() * dy;
    grad.bias += dy.colwise().sum();
    Mat<S> dx(x.rows(), x.cols());
    dx.noalias() = dy * readout.weight.transpose();
    return dx;
}

// ============================================================================
// Model
// ============================================================================

template <class S>
SequenceBatch<S> forward(const BasicModelParams<S>& params, const SequenceBatch<S>& input, ForwardCache<S>* cache) {
    if (input.features() != kNumChannels) {
        throw Error("forward: expected 16 channels, got " + std::to_string(input.features()));
    }
    if (input.batch < 1 || input.steps < 1 ||
        input.data.rows() != static_cast<Eigen::Index>(input.batch) * input.steps) {
        throw Error("forward: batch shape does not match its data");
    }
    ForwardCache<S> local;
    ForwardCache<S>& c = cache ? *cache : local;
    c.activations.clear();
    c.gru.clear();
    c.activations.push_back(input.data);
    for (const auto& m : params.mixing) {
        c.activations.push_back(mixing_forward(m, c.activations.back(), input.batch));
    }
    for (const auto& layer : params.recurrent) {
        const Mat<S>& x = c.activations.back();
        GruCache<S> fc, bc;
        Mat<S> hf = gru_forward(layer.forward, x, input.batch, input.steps, false, cache ? &fc : nullptr);
        Mat<S> hb = gru_forward(layer.backward, x, input.batch, input.steps, true, cache ? &bc : nullptr);
        Mat<S> both(hf.rows(), hf.cols() + hb.cols());
        both << hf, hb;
        if (cache) {
            c.gru.push_back(std::move(fc));
            c.gru.push_back(std::move(bc));
        }
        c.activations.push_back(std::move(both));
    }
    SequenceBatch<S> out;
    out.batch = input.batch;
    out.steps = input.steps;
    out.data = readout_forward(params.readout, c.activations.back());
    if (!cache) c.activations.clear();
    return out;
}

template <class S>
Mat<S> backward(const BasicModelParams<S>& params, const ForwardCache<S>& cache, const Mat<S>& d_output, int batch,
                int steps, BasicModelParams<S>& grads) {
    const std::size_t n_mix = params.mixing.size();
    const std::size_t n_rec = params.recurrent.size();
    if (cache.activations.size() != n_mix + n_rec + 1 || cache.gru.size() != 2 * n_rec) {
        throw Error("backward: cache does not match the model");
    }
    Mat<S> dx = readout_backward(params.readout, cache.activations.back(), d_output, grads.readout);
    for (std::size_t i = n_rec; i-- > 0;) {
        const auto& layer = params.recurrent[i];
        const Mat<S>& x = cache.activations[n_mix + i];
        const Eigen::Index h = layer.forward.w_hidden.rows();
        const Mat<S> dhf = dx.leftCols(h);
        const Mat<S> dhb = dx.rightCols(h);
        Mat<S> d_in = gru_backward(layer.forward, cache.gru[2 * i], x, dhf, batch, steps, false,
                                   grads.recurrent[i].forward);
        d_in += gru_backward(layer.backward, cache.gru[2 * i + 1], x, dhb, batch, steps, true,
                             grads.recurrent[i].backward);
        dx = std::move(d_in);
    }
    for (std::size_t i = n_mix; i-- > 0;) {
        dx = mixing_backward(params.mixing[i], cache.activations[i], cache.activations[i + 1], dx, batch,
                             grads.mixing[i]);
    }
    return dx;
}

template <class S>
S mae_loss(const Mat<S>& pred, const Mat<S>& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw Error("mae_loss: shape mismatch");
    }
    if (pred.size() == 0) throw Error("mae_loss: empty tensors");
    const double total = (pred - target).array().abs().template cast<double>().sum();
    return static_cast<S>(total / static_cast<double>(pred.size()));
}

template <class S>
Mat<S> mae_loss_grad(const Mat<S>& pred, const Mat<S>& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw Error("mae_loss_grad: shape mismatch");
    }
    const S scale = S(1) / static_cast<S>(pred.size());
    return ((pred - target).array().sign() * scale).matrix();
}

template <class S>
SequenceBatch<S> mask_batch(const SequenceBatch<S>& clean, std::span<const MaskPlan> plans, const Mat<S>& token) {
    SequenceBatch<S> masked = clean;
    if (plans.size() == 1) {
        const RowVec<S> tok = token.row(0);
        apply_mask(masked, plans[0], tok);
        return masked;
    }
    if (plans.size() != static_cast<std::size_t>(clean.batch)) {
        throw Error("mask_batch: need one plan or one per sequence");
    }
    for (int b = 0; b < clean.batch; ++b) {
        for (int c : plans[static_cast<std::size_t>(b)].channels()) {
            for (int t = 0; t < clean.steps; ++t) masked.data(clean.row(t, b), c) = token(0, c);
        }
    }
    return masked;
}

template <class S>
S masked_loss(const BasicModelParams<S>& params, const SequenceBatch<S>& clean, std::span<const MaskPlan> plans,
              BasicModelParams<S>* grads) {
    const SequenceBatch<S> masked = mask_batch(clean, plans, params.mask_token);
    if (!grads) {
        return mae_loss(forward(params, masked).data, clean.data);
    }
    ForwardCache<S> cache;
    const SequenceBatch<S> out = forward(params, masked, &cache);
    const S loss = mae_loss(out.data, clean.data);
    const Mat<S> d_out = mae_loss_grad(out.data, clean.data);
    const Mat<S> d_in = backward(params, cache, d_out, clean.batch, clean.steps, *grads);
    if (plans.size() == 1) {
        for (int c : plans[0].channels()) grads->mask_token(0, c) += d_in.col(c).sum();
    } else {
        for (int b = 0; b < clean.batch; ++b) {
            for (int c : plans[static_cast<std::size_t>(b)].channels()) {
                S acc = 0;
                for (int t = 0; t < clean.steps; ++t) acc += d_in(clean.row(t, b), c);
                grads->mask_token(0, c) += acc;
            }
        }
    }
    return loss;
}

// ============================================================================
// Explicit instantiations
// ============================================================================

#define ARTREC_INSTANTIATE(S)                                                                                   \
    template struct BasicModelParams<S>;                                                                        \
    template BasicModelParams<S> init_params<S>(const ModelConfig&, std::uint64_t);                              \
    template Mat<S> mixing_forward<S>(const MixingLayer<S>&, const Mat<S>&, int);                               \
    template Mat<S> mixing_backward<S>(const MixingLayer<S>&, const Mat<S>&, const Mat<S>&, const Mat<S>&, int, \
                                       MixingLayer<S>&);                                                        \
    template Mat<S> gru_forward<S>(const GruDirection<S>&, const Mat<S>&, int, int, bool, GruCache<S>*);         \
    template Mat<S> gru_backward<S>(const GruDirection<S>&, const GruCache<S>&, const Mat<S>&, const Mat<S>&,   \
                                    int, int, bool, GruDirection<S>&);                                          \
    template Mat<S> readout_forward<S>(const Readout<S>&, const Mat<S>&);                                        \
    template Mat<S> readout_backward<S>(const Readout<S>&, const Mat<S>&, const Mat<S>&, Readout<S>&);           \
    template SequenceBatch<S> forward<S>(const BasicModelParams<S>&, const SequenceBatch<S>&, ForwardCache<S>*); \
    template Mat<S> backward<S>(const BasicModelParams<S>&, const ForwardCache<S>&, const Mat<S>&, int, int,    \
                                BasicModelParams<S>&);                                                          \
    template S mae_loss<S>(const Mat<S>&, const Mat<S>&);                                                       \
    template Mat<S> mae_loss_grad<S>(const Mat<S>&, const Mat<S>&);                                             \
    template SequenceBatch<S> mask_batch<S>(const SequenceBatch<S>&, std::span<const MaskPlan>, const Mat<S>&); \
    template S masked_loss<S>(const BasicModelParams<S>&, const SequenceBatch<S>&, std::span<const MaskPlan>,   \
                              BasicModelParams<S>*);

ARTREC_INSTANTIATE(float)
ARTREC_INSTANTIATE(double)
#undef ARTREC_INSTANTIATE

template BasicModelParams<double> BasicModelParams<float>::cast<double>() const;
template BasicModelParams<float> BasicModelParams<double>::cast<float>() const;
template BasicModelParams<float> BasicModelParams<float>::cast<float>() const;
template BasicModelParams<double> BasicModelParams<double>::cast<double>() const;

// ============================================================================
// Gradient checking
// ============================================================================

namespace {

struct ProbeTarget {
    Mat<double>* value;
    const Mat<double>* grad;
    bool forced = false;  // sample every element
};

double relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    const double diff = std::abs(analytic - numeric);
    return scale < floor ? diff : diff / scale;
}

double check_probes(std::vector<ProbeTarget> targets, const std::function<double()>& loss,
                    const GradCheckOptions& opt) {
    if (!(opt.epsilon > 0.0)) throw Error("grad_check: epsilon must be positive");
    Rng rng(opt.seed);
    std::size_t total = 0;
    for (const auto& t : targets) total += static_cast<std::size_t>(t.value->size());
    const std::size_t per_tensor =
        std::max<std::size_t>(2, (static_cast<std::size_t>(opt.samples) + targets.size() - 1) / targets.size());

    double worst = 0.0;
    for (auto& target : targets) {
        const auto size = static_cast<std::size_t>(target.value->size());
        std::vector<std::size_t> idx(size);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        if (!target.forced) idx.resize(std::min(size, per_tensor));
        for (std::size_t k : idx) {
            double& w = target.value->data()[k];
            const double saved = w;
            w = saved + opt.epsilon;
            const double up = loss();
            w = saved - opt.epsilon;
            const double down = loss();
            w = saved;
            const double numeric = (up - down) / (2.0 * opt.epsilon);
            const double analytic = target.grad->data()[k];
            worst = std::max(worst, relative_error(analytic, numeric, opt.absolute_floor));
        }
    }
    return worst;
}

Mat<double> random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Mat<double> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

ModelConfig tiny_config() {
    ModelConfig c;
    c.dilation_rates = {1, 2};
    c.mixing_width = 6;
    c.recurrent_layers = 2;
    c.recurrent_width = 4;
    c.n_mask = 3;
    return c;
}

BasicModelParams<double> tiny_params(std::uint64_t seed) {
    auto p = init_params<double>(tiny_config(), seed);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    // Non-zero biases and token so every path carries signal.
    visit_tensors(p, [&](const std::string& name, Mat<double>& m) {
        if (name.find("bias") != std::string::npos || name.find("b_") != std::string::npos ||
            name == "mask_token") {
            m = random_matrix(m.rows(), m.cols(), rng, 0.3);
        }
    });
    return p;
}

}  // namespace

double grad_check(const BasicModelParams<double>& params, const SequenceBatch<double>& clean, const MaskPlan& plan,
                  const GradCheckOptions& options) {
    if (!(options.epsilon > 0.0)) throw Error("grad_check: epsilon must be positive");
    BasicModelParams<double> work = params;
    BasicModelParams<double> grads = params.zeros_like();
    const std::array<MaskPlan, 1> plans{plan};
    masked_loss<double>(work, clean, plans, &grads);

    std::vector<ProbeTarget> targets;
    std::vector<const Mat<double>*> grad_list;
    visit_tensors(grads, [&](const std::string&, const Mat<double>& g) { grad_list.push_back(&g); });
    std::size_t k = 0;
    visit_tensors(work, [&](const std::string& name, Mat<double>& v) {
        targets.push_back({&v, grad_list[k++], name == "mask_token"});
    });
    return check_probes(targets, [&] { return masked_loss<double>(work, clean, plans, nullptr); }, options);
}

double grad_check_layer(GradCheckTarget target, const GradCheckOptions& options) {
    Rng rng(options.seed * 7919 + static_cast<std::uint64_t>(target));
    const int batch = 2;
    const int steps = 12;
    const Eigen::Index n = static_cast<Eigen::Index>(batch) * steps;

    switch (target) {
        case GradCheckTarget::Mixing: {
            MixingLayer<double> layer;
            layer.dilation = 2;
            layer.w_prev = random_matrix(5, 6, rng, 0.4);
            layer.w_mid = random_matrix(5, 6, rng, 0.4);
            layer.w_next = random_matrix(5, 6, rng, 0.4);
            layer.bias = random_matrix(1, 6, rng, 0.2);
            const Mat<double> x = random_matrix(n, 5, rng);
            const Mat<double> y_target = random_matrix(n, 6, rng, 0.5);
            MixingLayer<double> grad{2, Mat<double>::Zero(5, 6), Mat<double>::Zero(5, 6), Mat<double>::Zero(5, 6),
                                     Mat<double>::Zero(1, 6)};
            const Mat<double> y = mixing_forward(layer, x, batch);
            mixing_backward(layer, x, y, mae_loss_grad(y, y_target), batch, grad);
            return check_probes({{&layer.w_prev, &grad.w_prev},
                                 {&layer.w_mid, &grad.w_mid},
                                 {&layer.w_next, &grad.w_next},
                                 {&layer.bias, &grad.bias}},
                                [&] { return mae_loss(mixing_forward(layer, x, batch), y_target); }, options);
        }
        case GradCheckTarget::Recurrent: {
            const int in = 5, h = 4;
            BiGruLayer<double> layer;
            for (auto* g : {&layer.forward, &layer.backward}) {
                g->w_input = random_matrix(in, 3 * h, rng, 0.5);
                g->w_hidden = random_matrix(h, 3 * h, rng, 0.5);
                g->b_input = random_matrix(1, 3 * h, rng, 0.2);
                g->b_hidden = random_matrix(1, 3 * h, rng, 0.2);
            }
            BiGruLayer<double> grad;
            for (auto* g : {&grad.forward, &grad.backward}) {
                g->w_input = Mat<double>::Zero(in, 3 * h);
                g->w_hidden = Mat<double>::Zero(h, 3 * h);
                g->b_input = Mat<double>::Zero(1, 3 * h);
                g->b_hidden = Mat<double>::Zero(1, 3 * h);
            }
            const Mat<double> x = random_matrix(n, in, rng);
            const Mat<double> y_target = random_matrix(n, 2 * h, rng, 0.5);
            auto run = [&](GruCache<double>* fc, GruCache<double>* bc) {
                Mat<double> both(n, 2 * h);
                both << gru_forward(layer.forward, x, batch, steps, false, fc),
                    gru_forward(layer.backward, x, batch, steps, true, bc);
                return both;
            };
            GruCache<double> fc, bc;
            const Mat<double> y = run(&fc, &bc);
            const Mat<double> dy = mae_loss_grad(y, y_target);
            gru_backward(layer.forward, fc, x, Mat<double>(dy.leftCols(h)), batch, steps, false, grad.forward);
            gru_backward(layer.backward, bc, x, Mat<double>(dy.rightCols(h)), batch, steps, true, grad.backward);
            std::vector<ProbeTarget> probes;
            for (int dir = 0; dir < 2; ++dir) {
                auto& v = dir == 0 ? layer.forward : layer.backward;
                auto& g = dir == 0 ? grad.forward : grad.backward;
                probes.push_back({&v.w_input, &g.w_input});
                probes.push_back({&v.w_hidden, &g.w_hidden});
                probes.push_back({&v.b_input, &g.b_input});
                probes.push_back({&v.b_hidden, &g.b_hidden});
            }
            return check_probes(probes, [&] { return mae_loss(run(nullptr, nullptr), y_target); }, options);
        }
        case GradCheckTarget::Readout: {
            Readout<double> layer{random_matrix(6, kNumChannels, rng, 0.5), random_matrix(1, kNumChannels, rng, 0.2)};
            Readout<double> grad{Mat<double>::Zero(6, kNumChannels), Mat<double>::Zero(1, kNumChannels)};
            const Mat<double> x = random_matrix(n, 6, rng);
            const Mat<double> y_target = random_matrix(n, kNumChannels, rng);
            const Mat<double> y = readout_forward(layer, x);
            readout_backward(layer, x, mae_loss_grad(y, y_target), grad);
            return check_probes({{&layer.weight, &grad.weight}, {&layer.bias, &grad.bias}},
                                [&] { return mae_loss(readout_forward(layer, x), y_target); }, options);
        }
        case GradCheckTarget::MaskToken: {
            auto params = tiny_params(options.seed);
            SequenceBatch<double> clean(batch, steps, kNumChannels);
            clean.data = random_matrix(n, kNumChannels, rng);
            const std::array<MaskPlan, 1> plans{MaskPlan{PelletId::T1, PelletId::MNI}};
            auto grads = params.zeros_like();
            masked_loss<double>(params, clean, plans, &grads);
            return check_probes({{&params.mask_token, &grads.mask_token, true}},
                                [&] { return masked_loss<double>(params, clean, plans, nullptr); }, options);
        }
        case GradCheckTarget::FullStack: {
            const auto params = tiny_params(options.seed);
            SequenceBatch<double> clean(batch, steps, kNumChannels);
            clean.data = random_matrix(n, kNumChannels, rng);
            return grad_check(params, clean, MaskPlan{PelletId::UL, PelletId::T3, PelletId::MNM}, options);
        }
    }
    throw Error("grad_check_layer: unknown target");
}

}  // namespace artrec
