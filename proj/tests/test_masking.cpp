#include <set>

#include <boost/math/special_functions/gamma.hpp>

#include "artrec/masking.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace artrec;

namespace {

/// P(k distinct bins | n uniform balls in 8 bins) = C(8,k) k! S(n,k) / 8^n,
/// with S the Stirling numbers of the second kind.
std::vector<double> occupancy_distribution(int n) {
    std::vector<std::vector<long double>> S(n + 1, std::vector<long double>(9, 0.0L));
    S[0][0] = 1.0L;
    for (int i = 1; i <= n; ++i) {
        for (int k = 1; k <= 8; ++k) S[i][k] = k * S[i - 1][k] + S[i - 1][k - 1];
    }
    std::vector<double> p(9, 0.0);
    long double falling = 1.0L;
    for (int k = 1; k <= 8; ++k) {
        falling *= (8 - k + 1);  // 8! / (8-k)! = C(8,k) k!
        p[static_cast<std::size_t>(k)] = static_cast<double>(falling * S[n][k] / std::pow(8.0L, n));
    }
    return p;
}

}  // namespace

TEST_SUITE("masking") {

TEST_CASE("occupancy oracle matches the closed-form mean") {
    for (int n = 1; n <= 12; ++n) {
        const auto p = occupancy_distribution(n);
        double mean = 0.0, total = 0.0;
        for (int k = 1; k <= 8; ++k) {
            mean += k * p[static_cast<std::size_t>(k)];
            total += p[static_cast<std::size_t>(k)];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(mean == doctest::Approx(expected_plan_size(n)).epsilon(1e-12));
    }
}

TEST_CASE("sample_mask_plan") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) CHECK(sample_mask_plan(1, rng).size() == 1);
    CHECK_THROWS_AS(sample_mask_plan(0, rng), Error);
    CHECK_THROWS_AS(sample_mask_plan(9, rng), Error);
    CHECK(expected_plan_size(3) == doctest::Approx(2.640625));
    CHECK(expected_plan_size(8) == doctest::Approx(5.2511).epsilon(1e-4));
}

TEST_CASE("plan sizes follow the occupancy distribution (chi-square)") {
    constexpr int kDraws = 100000;
    for (int n = 1; n <= 8; ++n) {
        Rng rng(100 + n);
        std::vector<double> counts(9, 0.0);
        double sum = 0.0;
        for (int i = 0; i < kDraws; ++i) {
            const int s = sample_mask_plan(n, rng).size();
            counts[static_cast<std::size_t>(s)] += 1.0;
            sum += s;
        }
        CHECK(std::abs(sum / kDraws - expected_plan_size(n)) <= 0.02);
        if (n == 1) {
            CHECK(counts[1] == kDraws);
            continue;
        }
        const auto p = occupancy_distribution(n);
        // Pool sparse cells into their neighbour so every expected count is >= 5.
        double chi2 = 0.0, pooled_obs = 0.0, pooled_exp = 0.0;
        int cells = 0;
        for (int k = 1; k <= 8; ++k) {
            pooled_obs += counts[static_cast<std::size_t>(k)];
            pooled_exp += p[static_cast<std::size_t>(k)] * kDraws;
            if (pooled_exp >= 5.0) {
                chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
                ++cells;
                pooled_obs = pooled_exp = 0.0;
            }
        }
        if (pooled_exp > 0.0) chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / std::max(pooled_exp, 1e-300);
        const double pvalue = boost::math::gamma_q((cells - 1) / 2.0, chi2 / 2.0);
        INFO("n=" << n << " chi2=" << chi2 << " cells=" << cells);
        CHECK(pvalue > 0.001);
    }
}

TEST_CASE("apply_mask") {
    SequenceBatch<double> batch(3, 5, kNumChannels);
    std::mt19937_64 rng(2);
    for (Eigen::Index i = 0; i < batch.data.size(); ++i) batch.data.data()[i] = static_cast<double>(rng() % 1000) / 7.0;
    const auto original = batch;

    RowVec<double> zeros = RowVec<double>::Zero(kNumChannels);
    apply_mask(batch, MaskPlan{PelletId::UL}, zeros);
    CHECK((batch.data.leftCols(2).array() == 0.0).all());
    CHECK(batch.data.rightCols(14) == original.data.rightCols(14));

    batch = original;
    RowVec<double> tokens(kNumChannels);
    for (int c = 0; c < kNumChannels; ++c) tokens(c) = 100.0 + c;
    const MaskPlan plan{PelletId::T1, PelletId::MNI};
    apply_mask(batch, plan, tokens);
    for (int c = 0; c < kNumChannels; ++c) {
        if (c == 4 || c == 5 || c == 12 || c == 13) {
            CHECK((batch.data.col(c).array() == tokens(c)).all());
        } else {
            CHECK(batch.data.col(c) == original.data.col(c));
        }
    }
    auto twice = batch;
    apply_mask(twice, plan, tokens);
    CHECK(twice.data == batch.data);
}

TEST_CASE("enumerate_combinations") {
    const int binom[9] = {1, 8, 28, 56, 70, 56, 28, 8, 1};
    for (int k = 1; k <= 8; ++k) {
        const auto plans = enumerate_combinations(k);
        CHECK(plans.size() == static_cast<std::size_t>(binom[k]));
        std::set<std::uint8_t> unique;
        for (const auto& p : plans) {
            CHECK(p.size() == k);
            unique.insert(p.bits());
        }
        CHECK(unique.size() == plans.size());
        CHECK(std::is_sorted(plans.begin(), plans.end()));
    }
    CHECK(enumerate_combinations(3).front() == MaskPlan{PelletId::UL, PelletId::LL, PelletId::T1});
    CHECK_THROWS_AS(enumerate_combinations(0), Error);
    CHECK_THROWS_AS(enumerate_combinations(9), Error);
}

TEST_CASE("related combinations") {
    CHECK(is_related_combination({PelletId::UL, PelletId::LL, PelletId::T1}));
    CHECK(is_related_combination({PelletId::T1, PelletId::T2, PelletId::T3}));
    CHECK(is_related_combination({PelletId::MNI, PelletId::MNM}));
    CHECK_FALSE(is_related_combination({PelletId::UL, PelletId::T1, PelletId::MNI}));
    CHECK_FALSE(is_related_combination({PelletId::T1, PelletId::T4}));

    int related = 0, lips = 0, mandible = 0, tongue = 0;
    for (const auto& p : enumerate_combinations(3)) {
        if (!is_related_combination(p)) continue;
        ++related;
        if (p.contains(PelletId::UL) && p.contains(PelletId::LL)) ++lips;
        if (p.contains(PelletId::MNI) && p.contains(PelletId::MNM)) ++mandible;
        int t = 0;
        for (auto q : {PelletId::T1, PelletId::T2, PelletId::T3, PelletId::T4}) t += p.contains(q);
        if (t >= 3) ++tongue;
    }
    CHECK(related == 16);
    CHECK(lips == 6);
    CHECK(mandible == 6);
    CHECK(tongue == 4);
}

TEST_CASE("plan labels") {
    const MaskPlan p{PelletId::MNI, PelletId::T1};
    CHECK(p.label() == "T1+MNI");
    CHECK(p.channels() == std::vector<int>{4, 5, 12, 13});
    CHECK(p.names() == std::vector<std::string>{"T1", "MNI"});
}

}
