#include "artrec/masking.hpp"

#include <bit>
#include <cmath>

namespace artrec {

std::vector<PelletId> MaskPlan::pellets() const {
    std::vector<PelletId> out;
    for (auto p : kAllPellets) {
        if (contains(p)) out.push_back(p);
    }
    return out;
}

std::vector<int> MaskPlan::channels() const {
    std::vector<int> out;
    for (int c = 0; c < kNumChannels; ++c) {
        if (contains_channel(c)) out.push_back(c);
    }
    return out;
}

std::string MaskPlan::label() const {
    std::string out;
    for (auto p : pellets()) {
        if (!out.empty()) out += '+';
        out += pellet_name(p);
    }
    return out.empty() ? "none" : out;
}

std::vector<std::string> MaskPlan::names() const {
    std::vector<std::string> out;
    for (auto p : pellets()) out.emplace_back(pellet_name(p));
    return out;
}

bool MaskPlan::operator<(const MaskPlan& o) const {
    // Lexicographic on the ascending pellet index tuple.
    const auto a = pellets();
    const auto b = o.pellets();
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

MaskPlan sample_mask_plan(int n, Rng& rng) {
    if (n < 1 || n > kNumPellets) throw Error("sample_mask_plan: n must be in 1..8, got " + std::to_string(n));
    std::uniform_int_distribution<int> pick(1, kNumPellets);
    MaskPlan plan;
    for (int i = 0; i < n; ++i) plan.insert(static_cast<PelletId>(pick(rng) - 1));
    return plan;
}

double expected_plan_size(int n) {
    return kNumPellets * (1.0 - std::pow(7.0 / 8.0, n));
}

std::vector<MaskPlan> enumerate_combinations(int k) {
    if (k < 1 || k > kNumPellets) throw Error("enumerate_combinations: k must be in 1..8, got " + std::to_string(k));
    std::vector<MaskPlan> out;
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
        MaskPlan plan;
        for (int i : idx) plan.insert(static_cast<PelletId>(i));
        out.push_back(plan);
        int i = k - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == kNumPellets - k + i) --i;
        if (i < 0) break;
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

bool is_related_combination(const MaskPlan& plan) {
    if (plan.contains(PelletId::UL) && plan.contains(PelletId::LL)) return true;
    if (plan.contains(PelletId::MNI) && plan.contains(PelletId::MNM)) return true;
    const int tongue = plan.contains(PelletId::T1) + plan.contains(PelletId::T2) + plan.contains(PelletId::T3) +
                       plan.contains(PelletId::T4);
    return tongue >= 3;
}

}  // namespace artrec
