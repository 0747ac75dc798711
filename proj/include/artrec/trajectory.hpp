#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace artrec {

// ============================================================================
// Errors
// ============================================================================

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// ============================================================================
// Pellets and channels
// ============================================================================

inline constexpr int kNumPellets = 8;
inline constexpr int kNumChannels = 16;
inline constexpr double kCanonicalRate = 160.0;
inline constexpr int kFrameLength = 200;

/// Canonical pellet order. The numeric value is the serialization order.
enum class PelletId : std::uint8_t { UL = 0, LL = 1, T1 = 2, T2 = 3, T3 = 4, T4 = 5, MNI = 6, MNM = 7 };

enum class Axis : std::uint8_t { X = 0, Y = 1 };

inline constexpr std::array<PelletId, kNumPellets> kAllPellets = {
    PelletId::UL, PelletId::LL, PelletId::T1, PelletId::T2,
    PelletId::T3, PelletId::T4, PelletId::MNI, PelletId::MNM};

/// Channels interleave axes per pellet: UL_x, UL_y, LL_x, LL_y, ...
constexpr int channel_index(PelletId pellet, Axis axis) {
    return 2 * static_cast<int>(pellet) + static_cast<int>(axis);
}

constexpr PelletId channel_pellet(int channel) { return static_cast<PelletId>(channel / 2); }
constexpr Axis channel_axis(int channel) { return static_cast<Axis>(channel % 2); }

std::string_view pellet_name(PelletId pellet);
std::optional<PelletId> pellet_from_name(std::string_view name);
/// "UL_x", "T1_y", ...
std::string channel_name(int channel);

// ============================================================================
// Recording
// ============================================================================

/// T x 16 samples in millimetres.
using ChannelMatrix = Eigen::Matrix<double, Eigen::Dynamic, kNumChannels, Eigen::RowMajor>;
/// T x 8 per-pellet mistrack flags.
using FlagMatrix = Eigen::Array<bool, Eigen::Dynamic, kNumPellets, Eigen::RowMajor>;

/// A per-speaker, per-task multichannel trajectory with mistrack flags.
/// Immutable after construction; the constructor enforces the invariants.
class Recording {
public:
    Recording(std::string speaker_id, std::string task_id, double sample_rate,
              ChannelMatrix samples, FlagMatrix mistrack);

    const std::string& speaker_id() const { return speaker_id_; }
    const std::string& task_id() const { return task_id_; }
    double sample_rate() const { return sample_rate_; }
    const ChannelMatrix& samples() const { return samples_; }
    const FlagMatrix& mistrack() const { return mistrack_; }
    std::size_t length() const { return static_cast<std::size_t>(samples_.rows()); }

    bool is_flagged(std::size_t t, PelletId p) const {
        return mistrack_(static_cast<Eigen::Index>(t), static_cast<int>(p));
    }
    bool has_mistracking() const { return mistrack_.any(); }

private:
    std::string speaker_id_;
    std::string task_id_;
    double sample_rate_;
    ChannelMatrix samples_;
    FlagMatrix mistrack_;
};

/// Every non-flagged value is finite and shapes agree.
bool recording_values_valid(const ChannelMatrix& samples, const FlagMatrix& mistrack);

struct RecordingRef {
    std::string speaker_id;
    std::string task_id;
    auto operator<=>(const RecordingRef&) const = default;
};

/// A kFrameLength x 16 window cut from a recording.
struct Frame {
    ChannelMatrix data;
    FlagMatrix mistrack;
    RecordingRef source;
    std::size_t start_index = 0;

    bool clean() const { return !mistrack.any(); }
};

/// Count of flagged pellets at each sample, in [0, 8].
std::vector<int> mistrack_degree_series(const Recording& rec);

/// Seconds covered by the recording.
double recording_duration(const Recording& rec);

/// Pellets flagged at sample t, as a bitmask with bit i set for pellet i.
std::uint8_t flagged_mask_at(const Recording& rec, std::size_t t);

}  // namespace artrec
