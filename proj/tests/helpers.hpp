#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "artrec/trajectory.hpp"

namespace testutil {

using namespace artrec;

/// Smooth random trajectories in a plausible millimetre range.
inline ChannelMatrix random_samples(std::size_t length, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ChannelMatrix m(static_cast<Eigen::Index>(length), kNumChannels);
    for (int c = 0; c < kNumChannels; ++c) {
        const double base = 20.0 * u(rng), amp = 5.0 + 3.0 * u(rng), f = 1.0 + 2.0 * (u(rng) + 1.0);
        const double ph = 3.0 * u(rng);
        for (Eigen::Index t = 0; t < m.rows(); ++t) {
            m(t, c) = base + amp * std::sin(2.0 * M_PI * f * static_cast<double>(t) / kCanonicalRate + ph) +
                      0.1 * u(rng);
        }
    }
    return m;
}

inline FlagMatrix no_flags(std::size_t length) {
    return FlagMatrix::Constant(static_cast<Eigen::Index>(length), kNumPellets, false);
}

inline Recording make_recording(std::size_t length, std::uint64_t seed = 1, std::string speaker = "S01",
                                std::string task = "t001", double rate = kCanonicalRate) {
    return Recording(std::move(speaker), std::move(task), rate, random_samples(length, seed), no_flags(length));
}

/// Copy of rec with pellet p flagged on [start, end).
inline Recording with_flags(const Recording& rec, PelletId p, std::size_t start, std::size_t end) {
    FlagMatrix f = rec.mistrack();
    for (std::size_t t = start; t < end; ++t) f(static_cast<Eigen::Index>(t), static_cast<int>(p)) = true;
    return Recording(rec.speaker_id(), rec.task_id(), rec.sample_rate(), rec.samples(), f);
}

/// Pearson correlation written directly from its definition, in long double.
inline double ppmc_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    const long double n = static_cast<long double>(x.size());
    long double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const long double mx = sx / n, my = sy / n;
    long double cov = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    return static_cast<double>(cov / std::sqrt(vx * vy));
}

/// Window starts a brute-force scan accepts: every start s with s % hop == 0
/// and s + window <= length.
inline std::vector<std::size_t> brute_force_starts(std::size_t length, std::size_t window, std::size_t hop) {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < length; ++s) {
        if (s % hop == 0 && s + window <= length) out.push_back(s);
    }
    return out;
}

inline bool window_clean(const Recording& rec, std::size_t start, std::size_t window) {
    for (std::size_t t = start; t < start + window; ++t) {
        for (int p = 0; p < kNumPellets; ++p) {
            if (rec.mistrack()(static_cast<Eigen::Index>(t), p)) return false;
        }
    }
    return true;
}

/// Removes the directory on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("artrec_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
