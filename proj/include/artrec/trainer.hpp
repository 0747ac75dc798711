#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "artrec/artifact.hpp"
#include "artrec/pipeline.hpp"

namespace artrec {

/// Tracks the best holdout loss; signals a stop once `patience` consecutive
/// epochs pass without a strict improvement. Epochs are 1-based.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience);

    /// Returns true when training should stop after this epoch.
    bool update(int epoch, double loss);
    bool improved() const { return improved_; }
    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

private:
    int patience_;
    int best_epoch_ = 0;
    double best_loss_ = 0.0;
    bool improved_ = false;
};

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
public:
    Adam(const ModelParams& shape, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
         double epsilon = 1e-8);
    void step(ModelParams& params, const ModelParams& grads);
    long long steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
    ModelParams m_, v_;
};

struct TrainOptions {
    /// Called after every epoch with (epoch, train_loss, holdout_loss).
    std::function<void(int, double, double)> on_epoch;
    /// When set, history.json is rewritten every epoch and the best model is
    /// checkpointed here every `checkpoint_every` epochs.
    std::optional<std::filesystem::path> run_dir;
    int checkpoint_every = 25;
    std::string speaker_id;
};

/// Trains one masked autoencoder. Both datasets must already be normalized
/// with the same normalizer; the returned artifact carries the parameters
/// of the best holdout epoch.
ModelArtifact train_speaker_model(const FrameDataset& train, const FrameDataset& holdout, const ModelConfig& config,
                                  const TrainOptions& options = {});

/// One artifact per n_mask in 1..8, everything else taken from base.
std::vector<ModelArtifact> sweep_n(const FrameDataset& train, const FrameDataset& holdout, const ModelConfig& base,
                                   const TrainOptions& options = {});

/// Index of the best score; ties go to the smaller n.
std::size_t select_best(const std::vector<int>& n_values, const std::vector<double>& scores);

/// Scores every artifact on raw (millimetre) test frames by the pooled mean
/// PPMC over masking levels 1..3 and returns the winner with selection
/// metadata filled in.
ModelArtifact select_model(const std::vector<ModelArtifact>& artifacts, const std::vector<Frame>& test_frames);

}  // namespace artrec
