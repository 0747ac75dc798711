#include "artrec/evalsuite.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

using namespace artrec;
using namespace testutil;

namespace {

std::vector<Frame> test_frames(std::size_t count) {
    std::vector<Frame> frames;
    for (std::size_t i = 0; i < count; ++i) {
        frames.push_back({random_samples(200, 40 + i), no_flags(200), {"S", "t"}, 200 * i});
    }
    return frames;
}

FramePredictor copy_truth() {
    return [](const std::vector<Frame>& frames, const MaskPlan&) {
        std::vector<ChannelMatrix> out;
        for (const auto& f : frames) out.push_back(f.data);
        return out;
    };
}

FramePredictor negate_truth() {
    return [](const std::vector<Frame>& frames, const MaskPlan&) {
        std::vector<ChannelMatrix> out;
        for (const auto& f : frames) out.push_back(-f.data);
        return out;
    };
}

bool related_by_hand(int a, int b, int c) {
    const int s[3] = {a, b, c};
    bool ul = false, ll = false, mi = false, mm = false;
    int tongue = 0;
    for (int p : s) {
        ul |= p == 0;
        ll |= p == 1;
        mi |= p == 6;
        mm |= p == 7;
        tongue += p >= 2 && p <= 5;
    }
    return (ul && ll) || (mi && mm) || tongue >= 3;
}

}  // namespace

TEST_SUITE("evalsuite") {

TEST_CASE("ppmc basics") {
    const std::vector<double> x{1, 2, 3}, y{3, 2, 1};
    CHECK(ppmc(x, x) == doctest::Approx(1.0));
    CHECK(ppmc(x, y) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(ppmc(std::vector<double>{1, 1, 1}, x), Error);
    CHECK_THROWS_AS(ppmc(x, std::vector<double>{1, 2}), Error);
    CHECK_THROWS_AS(ppmc(std::vector<double>{1}, std::vector<double>{2}), Error);
}

TEST_CASE("ppmc matches the definition and is affine invariant") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 500;
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = g(rng) * 10.0 + 3.0;
            b[i] = 0.5 * a[i] + g(rng);
        }
        const double r = ppmc(a, b);
        CHECK(std::abs(r - ppmc_oracle(a, b)) <= 1e-12);
        std::vector<double> t(n);
        const double scale = 0.1 + std::abs(g(rng)) * 5.0, shift = g(rng) * 100.0;
        for (std::size_t i = 0; i < n; ++i) t[i] = scale * a[i] + shift;
        CHECK(std::abs(ppmc(t, b) - r) <= 1e-12);
    }
}

TEST_CASE("stub predictors") {
    const auto frames = test_frames(3);
    const auto r = evaluate_plan(copy_truth(), frames, MaskPlan{PelletId::UL});
    REQUIRE(r.scores.size() == 2);
    CHECK(r.scores[0].channel == 0);
    CHECK(r.scores[0].ppmc == doctest::Approx(1.0));
    CHECK(r.scores[1].ppmc == doctest::Approx(1.0));
    for (const auto& s : evaluate_plan(negate_truth(), frames, MaskPlan{PelletId::T2, PelletId::MNM}).scores) {
        CHECK(s.ppmc == doctest::Approx(-1.0));
    }
    CHECK_THROWS_AS(evaluate_plan(copy_truth(), frames, MaskPlan{}), Error);

    for (int k = 1; k <= 7; ++k) {
        const auto level = evaluate_level(copy_truth(), frames, k);
        CHECK(level.avg_x == doctest::Approx(1.0));
        CHECK(level.avg_y == doctest::Approx(1.0));
    }
    CHECK(selection_score(copy_truth(), frames) == doctest::Approx(1.0));
}

TEST_CASE("zero-variance truth channel is reported by name") {
    auto frames = test_frames(2);
    for (auto& f : frames) f.data.col(channel_index(PelletId::T3, Axis::Y)).setConstant(4.0);
    CHECK_THROWS_WITH_AS(evaluate_plan(copy_truth(), frames, MaskPlan{PelletId::T3}), doctest::Contains("T3_y"), Error);
}

TEST_CASE("level aggregation is the plain channel mean") {
    std::vector<PlanResult> results{
        {MaskPlan{PelletId::UL}, {{0, 0.9}, {1, 0.7}}},
        {MaskPlan{PelletId::T1}, {{4, 0.5}, {5, 0.6}}},
        {MaskPlan{PelletId::MNM}, {{14, 0.4}, {15, 1.0}}},
    };
    const auto l = aggregate_level(1, results);
    CHECK(l.avg_x == doctest::Approx((0.9 + 0.5 + 0.4) / 3));
    CHECK(l.avg_y == doctest::Approx((0.7 + 0.6 + 1.0) / 3));
    CHECK(l.plans == 3);
}

TEST_CASE("per-pellet breakdown statistics") {
    std::vector<PlanResult> results{
        {MaskPlan{PelletId::UL, PelletId::T1}, {{0, 0.9}, {1, 0.8}, {4, 0.5}, {5, 0.4}}},
        {MaskPlan{PelletId::UL, PelletId::LL}, {{0, 0.3}, {1, 0.2}, {2, 0.1}, {3, 0.0}}},
    };
    const auto all = aggregate_per_pt(2, results, false);
    CHECK(all.x[0].mean == doctest::Approx(0.6));
    CHECK(all.x[0].max == doctest::Approx(0.9));
    CHECK(all.x[0].min == doctest::Approx(0.3));
    CHECK(all.x[0].count == 2);
    CHECK(all.plans_used == 2);
    const auto excl = aggregate_per_pt(2, results, true);
    CHECK(excl.x[0].mean == doctest::Approx(0.9));
    CHECK(excl.x[1].count == 0);
    CHECK(excl.plans_used == 1);
}

TEST_CASE("exclusion at k=3 keeps exactly the 40 unrelated plans") {
    int counts[8] = {};
    int survivors = 0;
    for (int a = 0; a < 8; ++a) {
        for (int b = a + 1; b < 8; ++b) {
            for (int c = b + 1; c < 8; ++c) {
                if (related_by_hand(a, b, c)) continue;
                ++survivors;
                ++counts[a];
                ++counts[b];
                ++counts[c];
            }
        }
    }
    CHECK(survivors == 40);
    const auto frames = test_frames(1);
    const auto report = per_pt_breakdown(copy_truth(), frames, 3, true);
    CHECK(report.plans_used == 40);
    for (int p = 0; p < 8; ++p) {
        CHECK(report.x[static_cast<std::size_t>(p)].count == static_cast<std::size_t>(counts[p]));
        CHECK(report.y[static_cast<std::size_t>(p)].count == static_cast<std::size_t>(counts[p]));
    }
    CHECK(per_pt_breakdown(copy_truth(), frames, 3, false).plans_used == 56);
}

TEST_CASE("reports and plots") {
    const auto frames = test_frames(2);
    EvalReport report;
    report.provenance = {"JW11", 3, 42};
    for (int k = 1; k <= 7; ++k) report.levels.push_back(evaluate_level(negate_truth(), frames, k));
    report.per_pt = per_pt_breakdown(copy_truth(), frames, 3, true);

    const auto levels = nlohmann::json::parse(levels_to_json(report));
    CHECK(levels["provenance"]["speaker"] == "JW11");
    CHECK(levels["provenance"]["n_mask"] == 3);
    CHECK(levels["provenance"]["seed"] == 42);
    CHECK(levels["levels"].size() == 7);
    CHECK(levels_to_csv(report).find("JW11,3,42,1,") != std::string::npos);
    const auto per_pt = nlohmann::json::parse(per_pt_to_json(report));
    CHECK(per_pt["pellets"].size() == 8);
    CHECK(per_pt_to_csv(report).find("UL,x,") != std::string::npos);

    const auto bars = emit_plot(report, "levels");
    CHECK(bars.find("<svg") == 0);
    CHECK(bars.find("Number of Masked PTs During Testing") != std::string::npos);
    CHECK(emit_plot(report, "per_pt").find("Masked PTs") != std::string::npos);
    CHECK_THROWS_AS(emit_plot(report, "pie"), Error);

    for (int c : MaskPlan{PelletId::T1, PelletId::MNI}.channels()) {
        OverlayPanel p;
        p.channel = channel_name(c);
        for (int t = 0; t < 200; ++t) {
            p.truth.push_back(frames[0].data(t, c));
            p.predicted.push_back(frames[0].data(t, c) + 0.1);
        }
        p.highlighted.emplace_back(50, 90);
        report.overlay.push_back(p);
    }
    const auto overlay = emit_plot(report, "overlay");
    std::size_t panels = 0;
    for (auto at = overlay.find("(mm)"); at != std::string::npos; at = overlay.find("(mm)", at + 1)) ++panels;
    CHECK(panels == 4);
}

}
