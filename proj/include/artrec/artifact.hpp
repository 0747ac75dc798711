#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "artrec/mae_model.hpp"
#include "artrec/pipeline.hpp"

namespace artrec {

struct EpochRecord {
    double train_loss = 0.0;
    double holdout_loss = 0.0;
};

/// Epochs are numbered from 1; epochs[i] is epoch i + 1.
struct TrainingHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    int stopped_epoch = 0;
    /// Holdout loss before the first update.
    double initial_holdout_loss = 0.0;
};

/// Why this artifact was chosen among an N sweep, if it was.
struct SelectionMetadata {
    bool selected = false;
    double score = 0.0;
    std::vector<int> candidates_n;
    std::vector<double> candidate_scores;
};

/// Everything inference needs: weights, normalizer and configuration.
struct ModelArtifact {
    std::string speaker_id;
    ModelConfig config;
    ModelParams params;
    Normalizer normalizer;
    TrainingHistory history;
    SelectionMetadata selection;
};

inline constexpr std::uint32_t kArtifactVersion = 1;

/// Layout: 8-byte magic, u32 version, u64 JSON length, JSON metadata,
/// u64 float count, little-endian float32 tensor block, u32 CRC-32 of all
/// preceding bytes. Tensor offsets are listed in the JSON by name.
std::string save_artifact(const ModelArtifact& artifact);
ModelArtifact load_artifact(std::string_view bytes);

void save_artifact_file(const std::filesystem::path& path, const ModelArtifact& artifact);
ModelArtifact load_artifact_file(const std::filesystem::path& path);

/// JSON rendering of a config (also used for run directories).
std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(std::string_view text);

std::string history_to_json(const TrainingHistory& history);

}  // namespace artrec
