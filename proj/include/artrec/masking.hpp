#pragma once

#include <bit>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "artrec/sequence.hpp"
#include "artrec/trajectory.hpp"

namespace artrec {

/// Pseudo-random generator used for every stochastic choice in the library.
using Rng = std::mt19937_64;

/// Set of pellets whose channels are replaced by mask tokens.
class MaskPlan {
public:
    MaskPlan() = default;
    explicit MaskPlan(std::uint8_t bits) : bits_(bits) {}
    MaskPlan(std::initializer_list<PelletId> pellets) {
        for (auto p : pellets) insert(p);
    }

    void insert(PelletId p) { bits_ |= static_cast<std::uint8_t>(1u << static_cast<int>(p)); }
    bool contains(PelletId p) const { return (bits_ >> static_cast<int>(p)) & 1u; }
    bool contains_channel(int channel) const { return contains(channel_pellet(channel)); }
    int size() const { return std::popcount(bits_); }
    bool empty() const { return bits_ == 0; }
    std::uint8_t bits() const { return bits_; }

    /// Pellets in canonical order.
    std::vector<PelletId> pellets() const;
    /// Masked channel indices in ascending order.
    std::vector<int> channels() const;
    /// "T1+MNI"
    std::string label() const;
    /// Sorted pellet names, as written in reports.
    std::vector<std::string> names() const;

    bool operator==(const MaskPlan&) const = default;
    bool operator<(const MaskPlan& o) const;

private:
    std::uint8_t bits_ = 0;
};

/// Draws n uniform pellet indices in 1..8; the plan is the set of distinct draws.
MaskPlan sample_mask_plan(int n, Rng& rng);

/// Expected number of distinct pellets after n uniform draws: 8 (1 - (7/8)^n).
double expected_plan_size(int n);

/// Replaces every masked pellet's channels with the token values at every
/// step of every sequence. Unmasked channels are untouched.
template <class Scalar>
void apply_mask(SequenceBatch<Scalar>& batch, const MaskPlan& plan, const RowVec<Scalar>& tokens) {
    if (batch.features() != kNumChannels || tokens.size() != kNumChannels) {
        throw std::invalid_argument("apply_mask: expects 16 channels");
    }
    for (int c = 0; c < kNumChannels; ++c) {
        if (plan.contains_channel(c)) batch.data.col(c).setConstant(tokens(c));
    }
}

/// All k-subsets of the 8 pellets in lexicographic order of pellet indices.
std::vector<MaskPlan> enumerate_combinations(int k);

/// Both lips, both mandible pellets, or three or more tongue pellets.
bool is_related_combination(const MaskPlan& plan);

}  // namespace artrec
