#include "artrec/restore.hpp"
#include "artrec/synthbench.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

using namespace artrec;
using namespace testutil;

namespace {

/// Returns noise for every channel; only the restore bookkeeping matters.
WindowModel noise_model(std::uint64_t seed) {
    return [seed](const std::vector<ChannelMatrix>& windows, const std::vector<MaskPlan>& plans) {
        REQUIRE(windows.size() == plans.size());
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-50.0, 50.0);
        std::vector<ChannelMatrix> out;
        for (const auto& w : windows) {
            ChannelMatrix m(w.rows(), kNumChannels);
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
            out.push_back(m);
        }
        return out;
    };
}

/// Least-squares regression of the masked channels on the visible ones,
/// fitted per plan on clean reference data.
WindowModel regression_model(const std::vector<Recording>& reference) {
    return [reference](const std::vector<ChannelMatrix>& windows, const std::vector<MaskPlan>& plans) {
        std::vector<ChannelMatrix> out;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            std::vector<int> seen, hidden = plans[i].channels();
            for (int c = 0; c < kNumChannels; ++c) {
                if (!plans[i].contains_channel(c)) seen.push_back(c);
            }
            Eigen::Index rows = 0;
            for (const auto& r : reference) rows += static_cast<Eigen::Index>(r.length());
            Eigen::MatrixXd X(rows, static_cast<Eigen::Index>(seen.size()) + 1), Y(rows, static_cast<Eigen::Index>(hidden.size()));
            Eigen::Index at = 0;
            for (const auto& r : reference) {
                for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(r.length()); ++t, ++at) {
                    for (std::size_t j = 0; j < seen.size(); ++j) X(at, static_cast<Eigen::Index>(j)) = r.samples()(t, seen[j]);
                    X(at, static_cast<Eigen::Index>(seen.size())) = 1.0;
                    for (std::size_t j = 0; j < hidden.size(); ++j) Y(at, static_cast<Eigen::Index>(j)) = r.samples()(t, hidden[j]);
                }
            }
            const Eigen::MatrixXd beta = X.colPivHouseholderQr().solve(Y);
            ChannelMatrix pred = windows[i];
            for (Eigen::Index t = 0; t < pred.rows(); ++t) {
                for (std::size_t h = 0; h < hidden.size(); ++h) {
                    double v = beta(static_cast<Eigen::Index>(seen.size()), static_cast<Eigen::Index>(h));
                    for (std::size_t j = 0; j < seen.size(); ++j) {
                        v += windows[i](t, seen[j]) * beta(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(h));
                    }
                    pred(t, hidden[h]) = v;
                }
            }
            out.push_back(pred);
        }
        return out;
    };
}

Recording flag_cells(const Recording& rec, PelletId p, std::size_t a, std::size_t b) {
    const Recording flagged = with_flags(rec, p, a, b);
    ChannelMatrix s = rec.samples();
    for (std::size_t t = a; t < b; ++t) {
        s(static_cast<Eigen::Index>(t), channel_index(p, Axis::X)) = 1e6;
        s(static_cast<Eigen::Index>(t), channel_index(p, Axis::Y)) = std::nan("");
    }
    return Recording(rec.speaker_id(), rec.task_id(), rec.sample_rate(), s, flagged.mistrack());
}

Recording hours_recording(const std::string& task, double seconds, std::initializer_list<PelletId> flagged) {
    const auto n = static_cast<std::size_t>(std::llround(seconds));
    Recording r("S", task, 1.0, random_samples(n, 2), no_flags(n));
    for (auto p : flagged) r = with_flags(r, p, 0, 1);
    return r;
}

}  // namespace

TEST_SUITE("restore") {

TEST_CASE("detect_gaps") {
    const auto clean = make_recording(300);
    for (const auto& list : detect_gaps(clean)) CHECK(list.empty());
    const auto one = detect_gaps(with_flags(clean, PelletId::UL, 100, 150));
    REQUIRE(one[0].size() == 1);
    CHECK(one[0][0] == SampleInterval{100, 150});
    const auto two = detect_gaps(with_flags(with_flags(clean, PelletId::UL, 0, 10), PelletId::UL, 20, 30));
    CHECK(two[0] == std::vector<SampleInterval>{{0, 10}, {20, 30}});
    const auto tail = detect_gaps(with_flags(clean, PelletId::MNM, 290, 300));
    CHECK(tail[7] == std::vector<SampleInterval>{{290, 300}});
}

TEST_CASE("window placement") {
    CHECK(window_starts(1000, 200, 200) == std::vector<std::size_t>{0, 200, 400, 600, 800});
    CHECK(window_starts(1050, 200, 100).back() == 850);
    CHECK(window_starts(1050, 200, 100).size() == 10);
    CHECK(window_starts(200, 200, 100) == std::vector<std::size_t>{0});
    CHECK_THROWS_AS(window_starts(199, 200, 100), Error);
}

TEST_CASE("stitching") {
    const auto series = random_samples(1000, 6);
    for (std::size_t hop : {100u, 200u}) {
        for (std::size_t n : {1000u, 1037u, 200u}) {
            const ChannelMatrix s = random_samples(n, 7);
            std::vector<WindowPrediction> w;
            for (auto st : window_starts(n, 200, hop)) w.push_back({st, s.middleRows(static_cast<Eigen::Index>(st), 200)});
            CHECK(stitch(w, n) == s);
        }
    }
    std::vector<WindowPrediction> two{{0, ChannelMatrix::Constant(200, 16, 1.0)}, {100, ChannelMatrix::Constant(200, 16, 3.0)}};
    const auto avg = stitch(two, 300);
    CHECK(avg(50, 0) == 1.0);
    CHECK(avg(150, 7) == 2.0);
    CHECK(avg(250, 15) == 3.0);
    std::vector<WindowPrediction> hole{{0, series.topRows(200)}, {300, series.middleRows(300, 200)}};
    CHECK_THROWS_AS(stitch(hole, 500), Error);
}

TEST_CASE("clean recordings pass through unchanged") {
    const auto rec = make_recording(777);
    const auto out = reconstruct(rec, noise_model(1));
    CHECK(same_recording(out.repaired, rec));
}

TEST_CASE("only flagged samples change") {
    std::mt19937_64 rng(21);
    const PelletId allowed[] = {PelletId::UL, PelletId::T1, PelletId::T3, PelletId::MNI};
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 200 + rng() % 900;
        Recording rec = make_recording(n, trial);
        for (int g = 0; g < 3; ++g) {
            const std::size_t a = rng() % n, len = 1 + rng() % 80;
            rec = flag_cells(rec, allowed[rng() % 4], a, std::min(n, a + len));
        }
        const auto out = reconstruct(rec, noise_model(trial), trial % 2 ? 100 : 200);
        CHECK_FALSE(out.repaired.has_mistracking());
        for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(n); ++t) {
            for (int c = 0; c < kNumChannels; ++c) {
                if (rec.mistrack()(t, c / 2)) {
                    CHECK(std::isfinite(out.repaired.samples()(t, c)));
                } else {
                    const double a = rec.samples()(t, c), b = out.repaired.samples()(t, c);
                    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
                }
            }
        }
        CHECK(out.replaced == detect_gaps(rec));
        const auto again = reconstruct(rec, noise_model(trial), trial % 2 ? 100 : 200);
        CHECK(again.repaired.samples() == out.repaired.samples());
    }
}

TEST_CASE("unsupported combinations are refused") {
    const auto base = make_recording(600);
    const auto lips = flag_cells(flag_cells(base, PelletId::UL, 100, 180), PelletId::LL, 150, 220);
    try {
        reconstruct(lips, noise_model(1));
        FAIL("expected a refusal");
    } catch (const RefusalError& e) {
        CHECK(e.interval() == SampleInterval{150, 180});
        CHECK(e.pellets() == MaskPlan{PelletId::UL, PelletId::LL});
        CHECK(std::string(e.what()).find("UL+LL") != std::string::npos);
    }
    Recording four = base;
    for (auto p : {PelletId::UL, PelletId::T1, PelletId::T4, PelletId::MNI}) four = flag_cells(four, p, 300, 340);
    CHECK_THROWS_AS(reconstruct(four, noise_model(1)), RefusalError);
    // The same pellets at disjoint times are fine.
    const auto apart = flag_cells(flag_cells(base, PelletId::UL, 100, 150), PelletId::LL, 200, 250);
    CHECK_NOTHROW(reconstruct(apart, noise_model(1)));
    CHECK_THROWS_AS(reconstruct(make_recording(150), noise_model(1)), Error);
}

TEST_CASE("a 300 ms gap filled from the other pellets beats linear interpolation") {
    SynthConfig cfg;
    cfg.n_recordings = 4;
    cfg.seed = 12;
    const auto corpus = generate_corpus(cfg).corpus;
    const std::vector<Recording> reference(corpus.recordings.begin(), corpus.recordings.begin() + 3);
    const Recording& truth = corpus.recordings[3];
    const GapEvent gap{MaskPlan{PelletId::T1}, 700, 48};
    const auto damaged = flag_cells(truth, PelletId::T1, gap.start, gap.start + gap.length);

    const auto repaired = reconstruct(damaged, regression_model(reference)).repaired;
    const auto linear = baseline_interpolate(damaged, Interpolation::Linear);
    for (int c : gap.pellets.channels()) {
        const double model = fill_ppmc(repaired, truth, gap, c);
        CHECK(model > fill_ppmc(linear, truth, gap, c));
        CHECK(model > 0.95);
    }
}

TEST_CASE("provenance sidecar") {
    const auto rec = flag_cells(make_recording(400), PelletId::T2, 30, 60);
    const auto out = reconstruct(rec, noise_model(2));
    const auto doc = nlohmann::json::parse(provenance_to_json(rec, out, {"S01", 3, 9}));
    CHECK(doc["replaced"]["T2"][0]["start_sample"] == 30);
    CHECK(doc["replaced"]["T2"][0]["end_sample"] == 60);
    CHECK(doc["model"]["n_mask"] == 3);
    CHECK_FALSE(doc["replaced"].contains("UL"));
}

TEST_CASE("retrieval accounting") {
    // 7.2 h clean, 3.4 h affected of which 0.12 h are related-corrupted.
    const auto corpus = make_corpus({hours_recording("clean", 7.2 * 3600, {}),
                                     hours_recording("ok", (3.4 - 0.12) * 3600, {PelletId::T1, PelletId::MNI}),
                                     hours_recording("lost", 0.12 * 3600, {PelletId::MNI, PelletId::MNM})});
    const auto r = retrieval_accounting(corpus);
    CHECK(r.clean_hours == doctest::Approx(7.2));
    CHECK(r.mistracked_hours == doctest::Approx(3.4));
    CHECK(r.unrecoverable_hours == doctest::Approx(0.12));
    CHECK(r.recovered_hours == doctest::Approx(3.28));
    CHECK(r.usable_hours_after == doctest::Approx(10.48));
    const auto doc = nlohmann::json::parse(accounting_to_json(r));
    CHECK(doc["usable_hours_after"].get<double>() == 10.48);
    CHECK(doc["recovered_hours"].get<double>() == 3.28);
    CHECK(accounting_to_csv(r).find("7.20,3.40,0.12,3.28,10.48") != std::string::npos);

    const auto clean = retrieval_accounting(make_corpus({hours_recording("a", 100, {})}));
    CHECK(clean.recovered_hours == 0.0);
    CHECK(clean.usable_hours_after == clean.clean_hours);

    const auto bad = retrieval_accounting(make_corpus(
        {hours_recording("a", 100, {PelletId::UL, PelletId::LL}),
         hours_recording("b", 50, {PelletId::T1, PelletId::T2, PelletId::T3})}));
    CHECK(bad.recovered_hours == 0.0);
    CHECK(bad.unrecoverable_hours == bad.mistracked_hours);
    CHECK_THROWS_AS(retrieval_accounting(Corpus{}), Error);
}

}
