#include "artrec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "artrec/evalsuite.hpp"

namespace artrec {

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw Error("early stopping patience must be at least 1");
}

bool EarlyStopping::update(int epoch, double loss) {
    improved_ = best_epoch_ == 0 || loss < best_loss_;
    if (improved_) {
        best_epoch_ = epoch;
        best_loss_ = loss;
    }
    return epoch - best_epoch_ >= patience_;
}

Adam::Adam(const ModelParams& shape, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(shape.zeros_like()), v_(shape.zeros_like()) {}

void Adam::step(ModelParams& params, const ModelParams& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto step = static_cast<float>(lr_ * std::sqrt(c2) / c1);
    const auto b1 = static_cast<float>(beta1_);
    const auto b2 = static_cast<float>(beta2_);
    const auto eps = static_cast<float>(eps_ * std::sqrt(c2));

    std::vector<Mat<float>*> ps, ms, vs;
    std::vector<const Mat<float>*> gs;
    visit_tensors(params, [&](const std::string&, Mat<float>& m) { ps.push_back(&m); });
    visit_tensors(m_, [&](const std::string&, Mat<float>& m) { ms.push_back(&m); });
    visit_tensors(v_, [&](const std::string&, Mat<float>& m) { vs.push_back(&m); });
    visit_tensors(grads, [&](const std::string&, const Mat<float>& m) { gs.push_back(&m); });
    for (std::size_t i = 0; i < ps.size(); ++i) {
        auto g = gs[i]->array();
        auto m = ms[i]->array();
        auto v = vs[i]->array();
        m = b1 * m + (1.0f - b1) * g;
        v = b2 * v + (1.0f - b2) * g.square();
        ps[i]->array() -= step * m / (v.sqrt() + eps);
    }
}

namespace {

std::vector<SequenceBatch<float>> pack_batches(const std::vector<Frame>& frames, const std::vector<std::size_t>& order,
                                               int batch_size) {
    std::vector<SequenceBatch<float>> out;
    std::vector<Frame> chunk;
    for (std::size_t i = 0; i < order.size(); ++i) {
        chunk.push_back(frames[order[i]]);
        if (static_cast<int>(chunk.size()) == batch_size || i + 1 == order.size()) {
            out.push_back(pack_frames<float>(chunk));
            chunk.clear();
        }
    }
    return out;
}

std::vector<MaskPlan> draw_plans(const SequenceBatch<float>& batch, const ModelConfig& config, Rng& rng) {
    std::vector<MaskPlan> plans;
    const int count = config.per_sample_masking ? batch.batch : 1;
    for (int i = 0; i < count; ++i) plans.push_back(sample_mask_plan(config.n_mask, rng));
    return plans;
}

bool all_finite(const ModelParams& p) {
    bool ok = true;
    visit_tensors(p, [&](const std::string&, const Mat<float>& m) { ok = ok && m.allFinite(); });
    return ok;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

}  // namespace

ModelArtifact train_speaker_model(const FrameDataset& train, const FrameDataset& holdout, const ModelConfig& config,
                                  const TrainOptions& options) {
    validate(config);
    if (train.frames.empty()) throw Error("train_speaker_model: empty training set");
    if (holdout.frames.empty()) throw Error("train_speaker_model: empty holdout set");
    if (!train.normalized || !holdout.normalized) throw Error("train_speaker_model: datasets must be normalized");

    ModelArtifact artifact;
    artifact.speaker_id = options.speaker_id;
    artifact.config = config;
    artifact.normalizer = train.normalizer;
    artifact.params = init_model(config, config.seed);
    if (options.run_dir) std::filesystem::create_directories(*options.run_dir);

    // Holdout batches and masks are fixed so epoch losses are comparable.
    std::vector<std::size_t> hold_order(holdout.frames.size());
    std::iota(hold_order.begin(), hold_order.end(), 0);
    const auto hold_batches = pack_batches(holdout.frames, hold_order, config.batch_size);
    std::vector<std::vector<MaskPlan>> hold_plans;
    {
        Rng rng(config.seed ^ 0x5bd1e995a1b2c3d4ULL);
        for (const auto& b : hold_batches) hold_plans.push_back(draw_plans(b, config, rng));
    }
    auto holdout_loss = [&](const ModelParams& params) {
        double total = 0.0;
        double count = 0.0;
        for (std::size_t i = 0; i < hold_batches.size(); ++i) {
            total += static_cast<double>(masked_loss<float>(params, hold_batches[i], hold_plans[i], nullptr)) *
                     hold_batches[i].batch;
            count += hold_batches[i].batch;
        }
        return total / count;
    };

    Adam adam(artifact.params, config.learning_rate);
    EarlyStopping stopper(config.patience);
    ModelParams best = artifact.params;
    TrainingHistory& history = artifact.history;
    history.initial_holdout_loss = holdout_loss(artifact.params);

    std::vector<std::size_t> order(train.frames.size());
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng rng(config.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        double total = 0.0;
        double count = 0.0;
        std::size_t batch_index = 0;
        for (const auto& batch : pack_batches(train.frames, order, config.batch_size)) {
            const auto plans = draw_plans(batch, config, rng);
            ModelParams grads = artifact.params.zeros_like();
            const double loss = masked_loss<float>(artifact.params, batch, plans, &grads);
            if (!std::isfinite(loss) || !all_finite(grads)) {
                throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index) + " (n_mask " + std::to_string(config.n_mask) + ", lr " +
                            std::to_string(config.learning_rate) + ")");
            }
            adam.step(artifact.params, grads);
            total += loss * batch.batch;
            count += batch.batch;
            ++batch_index;
        }
        const double train_loss = total / count;
        const double hold_loss = holdout_loss(artifact.params);
        if (!std::isfinite(hold_loss)) {
            throw Error("training diverged: non-finite holdout loss at epoch " + std::to_string(epoch));
        }
        history.epochs.push_back({train_loss, hold_loss});
        const bool stop = stopper.update(epoch, hold_loss);
        if (stopper.improved()) best = artifact.params;
        history.best_epoch = stopper.best_epoch();
        history.stopped_epoch = epoch;
        if (options.on_epoch) options.on_epoch(epoch, train_loss, hold_loss);
        if (options.run_dir) {
            write_text(*options.run_dir / "history.json", history_to_json(history));
            if (options.checkpoint_every > 0 && epoch % options.checkpoint_every == 0) {
                ModelArtifact ckpt = artifact;
                ckpt.params = best;
                save_artifact_file(*options.run_dir / "checkpoint.artrec", ckpt);
            }
        }
        if (stop) break;
    }
    artifact.params = std::move(best);
    if (!all_finite(artifact.params)) throw Error("training produced non-finite parameters");
    return artifact;
}

std::vector<ModelArtifact> sweep_n(const FrameDataset& train, const FrameDataset& holdout, const ModelConfig& base,
                                   const TrainOptions& options) {
    std::vector<ModelArtifact> out;
    for (int n = 1; n <= kNumPellets; ++n) {
        ModelConfig cfg = base;
        cfg.n_mask = n;
        TrainOptions opt = options;
        if (options.run_dir) opt.run_dir = *options.run_dir / ("n" + std::to_string(n));
        out.push_back(train_speaker_model(train, holdout, cfg, opt));
    }
    return out;
}

std::size_t select_best(const std::vector<int>& n_values, const std::vector<double>& scores) {
    if (scores.empty() || n_values.size() != scores.size()) throw Error("select_best: empty or mismatched inputs");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best] || (scores[i] == scores[best] && n_values[i] < n_values[best])) best = i;
    }
    return best;
}

ModelArtifact select_model(const std::vector<ModelArtifact>& artifacts, const std::vector<Frame>& test_frames) {
    if (artifacts.empty()) throw Error("select_model: no artifacts");
    if (test_frames.empty()) throw Error("select_model: no test frames");
    if (artifacts.size() == 1) return artifacts.front();
    std::vector<int> ns;
    std::vector<double> scores;
    for (const auto& a : artifacts) {
        ns.push_back(a.config.n_mask);
        scores.push_back(selection_score(model_predictor(a), test_frames));
    }
    ModelArtifact chosen = artifacts[select_best(ns, scores)];
    chosen.selection.selected = true;
    chosen.selection.score = scores[select_best(ns, scores)];
    chosen.selection.candidates_n = ns;
    chosen.selection.candidate_scores = scores;
    return chosen;
}

}  // namespace artrec
