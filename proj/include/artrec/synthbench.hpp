#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "artrec/corpus_io.hpp"
#include "artrec/masking.hpp"
#include "artrec/restore.hpp"

namespace artrec {

struct SynthConfig {
    std::size_t n_recordings = 20;
    double duration_s = 10.0;
    int latent_dim = 4;
    double max_latent_hz = 8.0;
    double mixing_condition_bound = 10.0;
    /// Per channel, relative to the clean channel's standard deviation.
    double noise_std = 0.01;
    std::uint64_t seed = 0;
    std::string speaker = "SYN01";
    /// Sinusoids summed per latent signal.
    int components = 6;

    void validate() const;
};

struct SyntheticCorpus {
    Corpus corpus;
    /// 16 x latent_dim map shared by every recording, in millimetres.
    Eigen::MatrixXd mixing;
    Eigen::VectorXd offsets;
};

/// Band-limited latents mixed linearly to 16 channels. Sinusoid frequencies
/// sit on the recording's DFT bins, so nothing leaks above max_latent_hz.
SyntheticCorpus generate_corpus(const SynthConfig& cfg);

/// Ratio of the largest to the smallest singular value.
double condition_number(const Eigen::MatrixXd& m);

struct CorruptionSpec {
    /// Probabilities of 1, 2, 3 and more than 3 concurrently lost pellets.
    std::array<double, 4> degree_distribution{0.7278, 0.2035, 0.0506, 0.0181};
    double min_gap_ms = 50.0;
    double max_gap_ms = 500.0;
    std::size_t gaps_per_recording = 3;
    bool allow_related = false;

    void validate() const;
};

struct GapEvent {
    MaskPlan pellets;
    std::size_t start = 0;
    std::size_t length = 0;

    double duration_ms(double sample_rate) const { return 1000.0 * static_cast<double>(length) / sample_rate; }
};

/// Draws the pellet set and length of one gap; `start` is left at 0. The
/// "more than 3" bucket draws 4 pellets.
GapEvent sample_gap_event(const CorruptionSpec& spec, double sample_rate, Rng& rng);

struct CorruptedRecording {
    Recording corrupted;
    Recording truth;
    std::vector<GapEvent> gaps;  // sorted by start
};

/// Places gaps_per_recording non-overlapping gaps separated by at least one
/// clean sample and overwrites flagged cells with the mistrack sentinel.
CorruptedRecording inject_mistracking(const Recording& truth, const CorruptionSpec& spec, Rng& rng);

enum class Interpolation { Linear, Cubic };

/// Fills every flagged sample from neighbouring clean samples of the same
/// channel. Gaps touching an edge repeat the nearest clean value.
Recording baseline_interpolate(const Recording& rec, Interpolation method);

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

struct RepairMethod {
    std::string name;
    std::function<Recording(const Recording&)> repair;
};

RepairMethod interpolation_method(Interpolation method);
RepairMethod model_method(const ModelArtifact& artifact, std::size_t hop = kFrameLength / 2);

enum class GapBucket { Short = 0, Medium = 1, Long = 2 };  // <150, 150-300, >=300 ms

GapBucket bucket_of(double duration_ms);
std::string_view bucket_name(GapBucket bucket);

struct BucketScore {
    double mean_ppmc = 0.0;
    std::size_t scores = 0;  // gap-channel pairs
};

struct MethodScores {
    std::string method;
    std::array<BucketScore, 3> buckets{};
    BucketScore overall;
};

struct BenchmarkReport {
    std::vector<MethodScores> methods;
    std::array<std::size_t, 3> gaps_per_bucket{};
    std::size_t gaps_total = 0;
    std::size_t recordings_used = 0;
    /// Recordings skipped because some method refused them.
    std::size_t recordings_refused = 0;
    std::uint64_t seed = 0;
};

/// PPMC of the fill against truth over the gap's samples; 0 for a constant fill.
double fill_ppmc(const Recording& repaired, const Recording& truth, const GapEvent& gap, int channel);

/// Corrupts every recording with a per-recording seed, repairs with each
/// method and scores the fills per gap-length bucket. A recording any method
/// refuses is excluded for all methods so the comparison stays paired.
BenchmarkReport benchmark(const Corpus& truth, const std::vector<RepairMethod>& methods, const CorruptionSpec& spec,
                          std::uint64_t seed);

std::string benchmark_to_json(const BenchmarkReport& report);
std::string benchmark_to_csv(const BenchmarkReport& report);

}  // namespace artrec
