#include <fstream>
#include <map>
#include <sstream>

#include "artrec/cli.hpp"
#include "artrec/corpus_io.hpp"
#include "artrec/restore.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

using namespace artrec;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return files;
}

const std::vector<std::string> kTinyModel = {"--set", "mixing_width=8",  "--set", "recurrent_width=8",
                                             "--set", "max_epochs=3",    "--set", "batch_size=8",
                                             "--set", "test_tasks=t006,t007"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("configuration text") {
    const auto cfg = parse_run_config("# comment\nn_mask = 5\n\nmixing_width=32\ntest_tasks = a, b\nhop=200\n"
                                      "dilation_rates = 1,3\nearly_stop_on_test = true\n");
    CHECK(cfg.model.n_mask == 5);
    CHECK(cfg.model.mixing_width == 32);
    CHECK(cfg.model.dilation_rates == std::vector<int>{1, 3});
    CHECK(cfg.test_tasks == std::vector<std::string>{"a", "b"});
    CHECK(cfg.hop == 200);
    CHECK(cfg.early_stop_on_test);
    CHECK(cfg.model.recurrent_width == ModelConfig{}.recurrent_width);

    const auto back = parse_run_config(run_config_to_text(cfg));
    CHECK(back.model == cfg.model);
    CHECK(back.test_tasks == cfg.test_tasks);
    CHECK(back.hop == cfg.hop);
    CHECK(back.early_stop_on_test == cfg.early_stop_on_test);

    try {
        parse_run_config("n_mask = 2\nwidth = 3\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_run_config("n_mask = two\n"), ParseError);
    CHECK_THROWS_AS(parse_run_config("just words\n"), ParseError);
}

TEST_CASE("usage errors exit with 2") {
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"stats", "--no-such-flag"}).code == 2);
    CHECK(cli({"stats"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
    const auto missing = cli({"stats", "--manifest", "/nonexistent/manifest.json"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("error:") != std::string::npos);
}

TEST_CASE("stats prints the library report") {
    TempDir tmp;
    const auto dir = tmp.path();
    REQUIRE(cli({"synth", "--out", (dir / "syn").string(), "--recordings", "3", "--duration", "2",
                 "--corrupt"})
                .code == 0);
    for (const char* set : {"clean", "corrupted"}) {
        const auto manifest = dir / "syn" / set / "manifest.json";
        const Corpus corpus = load_manifest_file(manifest);
        const auto r = cli({"stats", "--manifest", manifest.string(), "--out", (dir / set).string()});
        REQUIRE(r.code == 0);
        std::string expected = stats_to_json(corpus_stats(corpus));
        if (std::string(set) == "corrupted") expected += histogram_to_json(mistrack_degree_breakdown(corpus));
        CHECK(r.out == expected);
        CHECK(slurp(dir / set / "stats.json") == stats_to_json(corpus_stats(corpus)));
        CHECK(fs::exists(dir / set / "stats.csv"));
        CHECK(fs::exists(dir / set / "degrees.json") == (std::string(set) == "corrupted"));
    }
    const auto truth = nlohmann::json::parse(slurp(dir / "syn" / "truth.json"));
    CHECK(truth["mixing"].size() == kNumChannels);
}

TEST_CASE("end to end on a tiny synthetic corpus") {
    TempDir tmp;
    const auto d = tmp.path();
    const auto syn = d / "syn", manifest = syn / "clean" / "manifest.json";
    REQUIRE(cli({"synth", "--out", syn.string(), "--recordings", "8", "--duration", "4", "--seed", "3"})
                .code == 0);
    const auto inputs_before = snapshot(syn);

    const auto prep = cli(with({"prepare", "--manifest", manifest.string(), "--out", (d / "data").string()},
                               kTinyModel));
    INFO(prep.err);
    REQUIRE(prep.code == 0);
    for (const char* f : {"train", "holdout", "test", "split.json"}) CHECK(fs::exists(d / "data" / "SYN01" / f));
    const auto split = nlohmann::json::parse(slurp(d / "data" / "SYN01" / "split.json"));
    CHECK(split["test"] == nlohmann::json::array({"t006", "t007"}));
    CHECK(parse_run_config(slurp(d / "data" / "config.txt")).model.mixing_width == 8);

    for (const char* out : {"m1", "m2"}) {
        const auto r = cli({"train", "--data", (d / "data").string(), "--out", (d / out).string()});
        INFO(r.err);
        REQUIRE(r.code == 0);
        CHECK(fs::exists(d / out / "SYN01" / "history.json"));
    }
    CHECK(slurp(d / "m1" / "SYN01" / "model.artrec") == slurp(d / "m2" / "SYN01" / "model.artrec"));
    const auto model = load_artifact_file(d / "m1" / "SYN01" / "model.artrec");
    CHECK(model.config.mixing_width == 8);
    CHECK(model.speaker_id == "SYN01");

    const auto sw = cli({"sweep", "--data", (d / "data").string(), "--out", (d / "sweep").string(), "--set",
                         "max_epochs=1"});
    INFO(sw.err);
    REQUIRE(sw.code == 0);
    for (int n = 1; n <= 8; ++n) CHECK(fs::exists(d / "sweep" / "SYN01" / ("n" + std::to_string(n)) / "model.artrec"));
    const auto sel = nlohmann::json::parse(slurp(d / "sweep" / "SYN01" / "selection.json"));
    const int chosen = load_artifact_file(d / "sweep" / "SYN01" / "model.artrec").config.n_mask;
    CHECK(sel.dump().find(std::to_string(chosen)) != std::string::npos);

    const auto ev = cli({"evaluate", "--model", (d / "m1" / "SYN01" / "model.artrec").string(), "--data",
                         (d / "data" / "SYN01").string(), "--k", "3", "--exclude-related", "--out",
                         (d / "eval").string()});
    INFO(ev.err);
    REQUIRE(ev.code == 0);
    for (const char* f : {"levels.json", "levels.csv", "levels.svg", "per_pt.json", "per_pt.csv", "per_pt.svg"}) {
        CHECK(fs::exists(d / "eval" / f));
    }
    const auto levels = nlohmann::json::parse(slurp(d / "eval" / "levels.json"));
    CHECK_FALSE(levels.empty());

    // Repair: one supported gap succeeds, a lip pair is refused by name.
    Recording rec = read_trajectory(syn / "clean" / "t000.txt", TrajectoryFileDefaults{"SYN01", "t000"});
    const auto good = with_flags(rec, PelletId::T2, 100, 140);
    write_trajectory(d / "good.txt", good);
    const auto bad = with_flags(with_flags(rec, PelletId::UL, 300, 340), PelletId::LL, 310, 330);
    write_trajectory(d / "bad.txt", bad);
    const auto good_before = slurp(d / "good.txt");

    const auto ok = cli({"reconstruct", "--model", (d / "m1" / "SYN01" / "model.artrec").string(), "--input",
                         (d / "good.txt").string(), "--out", (d / "fixed").string()});
    INFO(ok.err);
    CHECK(ok.code == 0);
    const auto fixed = read_trajectory(d / "fixed" / "good.txt", TrajectoryFileDefaults{"SYN01", "good"});
    CHECK_FALSE(fixed.has_mistracking());
    CHECK(fs::exists(d / "fixed" / "good.provenance.json"));
    CHECK(slurp(d / "good.txt") == good_before);

    const auto refused = cli({"reconstruct", "--model", (d / "m1" / "SYN01" / "model.artrec").string(),
                              "--input", (d / "bad.txt").string(), "--out", (d / "fixed2").string()});
    CHECK(refused.code != 0);
    CHECK(refused.err.find("UL") != std::string::npos);
    CHECK(refused.err.find("LL") != std::string::npos);
    CHECK_FALSE(fs::exists(d / "fixed2" / "bad.txt"));

    const auto bench = cli({"bench", "--manifest", manifest.string(), "--model",
                            (d / "m1" / "SYN01" / "model.artrec").string(), "--gaps", "2", "--out",
                            (d / "bench").string()});
    INFO(bench.err);
    CHECK(bench.code == 0);
    const auto b = nlohmann::json::parse(slurp(d / "bench" / "bench.json"));
    CHECK(b["methods"].size() == 3);

    CHECK(snapshot(syn) == inputs_before);
}

}
