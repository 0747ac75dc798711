#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "artrec/corpus_io.hpp"
#include "artrec/trajectory.hpp"

namespace artrec {

// ============================================================================
// Resampling and trimming
// ============================================================================

struct ResampledSeries {
    ChannelMatrix samples;
    FlagMatrix mistrack;
};

/// Linear interpolation onto a uniform grid at target_rate spanning the
/// original duration. An output sample is flagged for a pellet when either
/// source neighbour is flagged.
ResampledSeries resample(const ChannelMatrix& samples, const FlagMatrix& mistrack, double src_rate,
                         double target_rate = kCanonicalRate);

Recording resample_to_canonical(const Recording& rec);

/// Concatenates the kept spans. Intervals are [start_s, end_s) in seconds,
/// sorted and non-overlapping.
Recording apply_keep_intervals(const Recording& rec, const std::vector<TimeInterval>& intervals);

// ============================================================================
// Framing
// ============================================================================

enum class Hop : int { NoOverlap = kFrameLength, HalfOverlap = kFrameLength / 2 };

std::size_t frame_count(std::size_t length, std::size_t window, std::size_t hop);

std::vector<Frame> frame_recording(const Recording& rec, Hop hop);
/// Same as above with an explicit hop; window is always kFrameLength.
std::vector<Frame> frame_recording(const Recording& rec, std::size_t hop);

std::vector<Frame> filter_clean(std::vector<Frame> frames);

// ============================================================================
// Normalization
// ============================================================================

struct Normalizer {
    Eigen::Matrix<double, 1, kNumChannels> mean = Eigen::Matrix<double, 1, kNumChannels>::Zero();
    Eigen::Matrix<double, 1, kNumChannels> std = Eigen::Matrix<double, 1, kNumChannels>::Ones();
};

Normalizer fit_normalizer(const std::vector<Frame>& frames);
std::vector<Frame> normalize(std::vector<Frame> frames, const Normalizer& nrm);
ChannelMatrix normalize(const ChannelMatrix& series, const Normalizer& nrm);
ChannelMatrix denormalize(const ChannelMatrix& series, const Normalizer& nrm);

// ============================================================================
// Datasets
// ============================================================================

struct FrameDataset {
    std::vector<Frame> frames;
    Normalizer normalizer;
    std::size_t window = kFrameLength;
    std::size_t hop = kFrameLength;
    /// True once `frames` hold normalized values.
    bool normalized = false;
};

/// Frames every recording, keeps clean frames; ordered by (speaker, task, start).
std::vector<Frame> build_frames(const std::vector<Recording>& recordings, std::size_t hop);

/// Directory with dataset.json and frames.f32 (little-endian float32,
/// num_frames x 200 x 16).
void save_dataset(const std::filesystem::path& dir, const FrameDataset& ds);
FrameDataset load_dataset(const std::filesystem::path& dir);

// ============================================================================
// Task split
// ============================================================================

/// (speaker, listed task) -> replacement task.
using TaskSubstitutions = std::map<std::pair<std::string, std::string>, std::string>;

TaskSubstitutions parse_substitutions(std::string_view json_text);

struct CorpusSplit {
    Corpus train;
    Corpus test;
};

/// Per speaker: listed tasks (after substitution) go to test, the rest to train.
CorpusSplit split_by_tasks(const Corpus& corpus, const std::vector<std::string>& test_tasks,
                           const TaskSubstitutions& substitutions);

/// Moves roughly `fraction` of each speaker's recordings (whole recordings,
/// at least one when a speaker has two or more) into a holdout corpus.
CorpusSplit carve_holdout(const Corpus& corpus, double fraction);

}  // namespace artrec
