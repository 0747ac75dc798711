#include "artrec/artifact.hpp"
#include "artrec/mae_model.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace artrec;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.dilation_rates = {1, 2};
    c.mixing_width = 8;
    c.recurrent_width = 6;
    c.recurrent_layers = 1;
    return c;
}

template <class S>
SequenceBatch<S> random_batch(int batch, int steps, std::uint64_t seed) {
    SequenceBatch<S> b(batch, steps, kNumChannels);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index i = 0; i < b.data.size(); ++i) b.data.data()[i] = static_cast<S>(g(rng));
    return b;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
    std::vector<Mat<float>> ta, tb;
    auto& ma = const_cast<ModelParams&>(a);
    auto& mb = const_cast<ModelParams&>(b);
    visit_tensors(ma, [&](const std::string&, Mat<float>& m) { ta.push_back(m); });
    visit_tensors(mb, [&](const std::string&, Mat<float>& m) { tb.push_back(m); });
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].rows() != tb[i].rows() || ta[i].cols() != tb[i].cols() || ta[i] != tb[i]) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("mae_model") {

TEST_CASE("init is deterministic in the seed") {
    const auto cfg = small_config();
    CHECK(params_equal(init_model(cfg, 3), init_model(cfg, 3)));
    CHECK_FALSE(params_equal(init_model(cfg, 3), init_model(cfg, 4)));
    auto bad = cfg;
    bad.mixing_width = 0;
    CHECK_THROWS_AS(init_model(bad, 1), Error);
    bad = cfg;
    bad.n_mask = 9;
    CHECK_THROWS_AS(validate(bad), Error);
    const auto p = init_model(cfg, 1);
    CHECK((p.mask_token.array() == 0.0f).all());
    CHECK(p.mixing.size() == 2);
    CHECK(p.recurrent.size() == 1);
}

TEST_CASE("default architecture shapes") {
    const auto p = init_model(ModelConfig{}, 0);
    CHECK(p.mixing.size() == 3);
    CHECK(p.mixing[2].dilation == 4);
    CHECK(p.mixing[0].w_mid.rows() == 16);
    CHECK(p.mixing[0].w_mid.cols() == 128);
    CHECK(p.recurrent.size() == 2);
    CHECK(p.recurrent[1].forward.w_input.rows() == 256);
    CHECK(p.recurrent[1].forward.w_hidden.cols() == 384);
    CHECK(p.readout.weight.rows() == 256);
    CHECK(p.readout.weight.cols() == 16);
    CHECK(p.mask_token.cols() == 16);
}

TEST_CASE("forward shape contract") {
    const auto p = init_model(small_config(), 2);
    for (int b : {1, 7}) {
        const auto out = forward(p, random_batch<float>(b, 200, 1));
        CHECK(out.batch == b);
        CHECK(out.steps == 200);
        CHECK(out.data.cols() == 16);
        CHECK(out.data.allFinite());
    }
    SequenceBatch<float> zero(2, 10, kNumChannels);
    CHECK(forward(p, zero).data.allFinite());
    SequenceBatch<float> wrong(2, 10, 15);
    CHECK_THROWS_AS(forward(p, wrong), Error);
}

TEST_CASE("rows are independent and permutation equivariant") {
    const auto p = init_model(small_config(), 5);
    auto in = random_batch<float>(4, 30, 2);
    for (int t = 0; t < in.steps; ++t) in.data.row(in.row(t, 3)) = in.data.row(in.row(t, 1));
    const auto out = forward(p, in);
    CHECK(out.sequence(3) == out.sequence(1));

    SequenceBatch<float> perm(4, 30, kNumChannels);
    const int order[4] = {2, 0, 3, 1};
    for (int b = 0; b < 4; ++b) {
        for (int t = 0; t < 30; ++t) perm.data.row(perm.row(t, b)) = in.data.row(in.row(t, order[b]));
    }
    const auto pout = forward(p, perm);
    for (int b = 0; b < 4; ++b) CHECK((pout.sequence(b) - out.sequence(order[b])).cwiseAbs().maxCoeff() < 1e-6f);
}

TEST_CASE("mae_loss arithmetic") {
    Mat<double> a = Mat<double>::Random(6, 16);
    CHECK(mae_loss(a, a) == 0.0);
    Mat<double> b = a.array() + 1.0;
    CHECK(mae_loss<double>(b, a) == doctest::Approx(1.0));
    Mat<double> c = a;
    c.topRows(3).array() += 2.0;
    CHECK(mae_loss<double>(c, a) == doctest::Approx(1.0));
    Mat<double> d = Mat<double>::Random(6, 16);
    CHECK(mae_loss(a, d) == mae_loss(d, a));
    CHECK_THROWS_AS(mae_loss<double>(a, Mat<double>::Zero(5, 16)), Error);
}

TEST_CASE("gradient check per layer type") {
    CHECK(grad_check_layer(GradCheckTarget::Mixing) <= 1e-4);
    CHECK(grad_check_layer(GradCheckTarget::Recurrent) <= 1e-4);
    CHECK(grad_check_layer(GradCheckTarget::Readout) <= 1e-4);
    CHECK(grad_check_layer(GradCheckTarget::MaskToken) <= 1e-4);
    CHECK(grad_check_layer(GradCheckTarget::FullStack) <= 1e-4);
}

TEST_CASE("gradient check edge cases") {
    auto cfg = small_config();
    const auto zero = init_params<double>(cfg, 1).zeros_like();
    SequenceBatch<double> flat(2, 12, kNumChannels);
    CHECK(grad_check(zero, flat, MaskPlan{PelletId::T2}) <= 1e-6);

    GradCheckOptions bad;
    bad.epsilon = 0.0;
    CHECK_THROWS_AS(grad_check(zero, flat, MaskPlan{PelletId::T2}, bad), Error);
}

TEST_CASE("mask tokens receive gradient") {
    const auto p = init_params<double>(small_config(), 9);
    const auto clean = random_batch<double>(2, 20, 4);
    auto grads = p.zeros_like();
    const MaskPlan plan{PelletId::LL, PelletId::T4};
    const std::vector<MaskPlan> plans{plan};
    const double loss = masked_loss<double>(p, clean, plans, &grads);
    CHECK(loss > 0.0);
    for (int c : plan.channels()) CHECK(grads.mask_token(0, c) != 0.0);
    for (int c = 0; c < kNumChannels; ++c) {
        if (!plan.contains_channel(c)) CHECK(grads.mask_token(0, c) == 0.0);
    }
}

TEST_CASE("artifact round-trip and corruption") {
    ModelArtifact a;
    a.speaker_id = "JW11";
    a.config = small_config();
    a.config.n_mask = 5;
    a.config.learning_rate = 3e-4;
    a.config.seed = 1234567890123ULL;
    a.params = init_model(a.config, 8);
    a.params.mask_token.setConstant(0.25f);
    a.normalizer.mean.setConstant(-3.5);
    a.normalizer.std.setConstant(2.25);
    a.history.epochs = {{1.0, 0.9}, {0.8, 0.7}};
    a.history.best_epoch = 2;
    a.history.stopped_epoch = 2;
    a.history.initial_holdout_loss = 1.1;

    const auto bytes = save_artifact(a);
    const auto b = load_artifact(bytes);
    CHECK(b.speaker_id == a.speaker_id);
    CHECK(b.config == a.config);
    CHECK(params_equal(a.params, b.params));
    CHECK(b.normalizer.mean == a.normalizer.mean);
    CHECK(b.normalizer.std == a.normalizer.std);
    CHECK(b.history.best_epoch == 2);
    CHECK(b.history.epochs.size() == 2);
    CHECK(save_artifact(b) == bytes);

    for (std::size_t at : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
        std::string bad = bytes;
        bad[at] = static_cast<char>(bad[at] ^ 0x5a);
        CHECK_THROWS_AS(load_artifact(bad), Error);
    }
    CHECK_THROWS_AS(load_artifact(bytes.substr(0, bytes.size() - 9)), Error);
    CHECK_THROWS_AS(load_artifact(""), Error);

    testutil::TempDir dir;
    save_artifact_file(dir.path() / "m.artrec", a);
    CHECK(load_artifact_file(dir.path() / "m.artrec").config == a.config);
    CHECK(config_from_json(config_to_json(a.config)) == a.config);
}

}
