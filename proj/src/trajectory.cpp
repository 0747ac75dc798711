#include "artrec/trajectory.hpp"

#include <cmath>

namespace artrec {

namespace {
constexpr std::array<std::string_view, kNumPellets> kPelletNames = {
    "UL", "LL", "T1", "T2", "T3", "T4", "MNI", "MNM"};
}

std::string_view pellet_name(PelletId pellet) {
    return kPelletNames[static_cast<std::size_t>(pellet)];
}

std::optional<PelletId> pellet_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kPelletNames.size(); ++i) {
        if (kPelletNames[i] == name) return static_cast<PelletId>(i);
    }
    return std::nullopt;
}

std::string channel_name(int channel) {
    std::string out(pellet_name(channel_pellet(channel)));
    out += channel_axis(channel) == Axis::X ? "_x" : "_y";
    return out;
}

bool recording_values_valid(const ChannelMatrix& samples, const FlagMatrix& mistrack) {
    if (samples.rows() != mistrack.rows()) return false;
    for (Eigen::Index t = 0; t < samples.rows(); ++t) {
        for (int c = 0; c < kNumChannels; ++c) {
            if (!mistrack(t, c / 2) && !std::isfinite(samples(t, c))) return false;
        }
    }
    return true;
}

Recording::Recording(std::string speaker_id, std::string task_id, double sample_rate,
                     ChannelMatrix samples, FlagMatrix mistrack)
    : speaker_id_(std::move(speaker_id)),
      task_id_(std::move(task_id)),
      sample_rate_(sample_rate),
      samples_(std::move(samples)),
      mistrack_(std::move(mistrack)) {
    if (speaker_id_.empty() || task_id_.empty()) {
        throw Error("recording requires non-empty speaker and task ids");
    }
    if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_)) {
        throw Error("recording " + speaker_id_ + "/" + task_id_ + ": sample rate must be positive");
    }
    if (samples_.rows() < 1) {
        throw Error("recording " + speaker_id_ + "/" + task_id_ + ": needs at least one sample");
    }
    if (samples_.rows() != mistrack_.rows()) {
        throw Error("recording " + speaker_id_ + "/" + task_id_ + ": flag rows do not match samples");
    }
    if (!recording_values_valid(samples_, mistrack_)) {
        throw Error("recording " + speaker_id_ + "/" + task_id_ +
                    ": non-finite value in a sample that is not flagged");
    }
}

std::vector<int> mistrack_degree_series(const Recording& rec) {
    const auto& flags = rec.mistrack();
    std::vector<int> degree(rec.length());
    for (Eigen::Index t = 0; t < flags.rows(); ++t) {
        degree[static_cast<std::size_t>(t)] = static_cast<int>(flags.row(t).count());
    }
    return degree;
}

double recording_duration(const Recording& rec) {
    return static_cast<double>(rec.length()) / rec.sample_rate();
}

std::uint8_t flagged_mask_at(const Recording& rec, std::size_t t) {
    std::uint8_t mask = 0;
    for (int p = 0; p < kNumPellets; ++p) {
        if (rec.mistrack()(static_cast<Eigen::Index>(t), p)) mask |= static_cast<std::uint8_t>(1u << p);
    }
    return mask;
}

}  // namespace artrec
