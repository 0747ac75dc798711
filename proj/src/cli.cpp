#include "artrec/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "artrec/evalsuite.hpp"
#include "artrec/pipeline.hpp"
#include "artrec/restore.hpp"
#include "artrec/synthbench.hpp"
#include "artrec/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace artrec {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t at = 0;
    while (at <= s.size()) {
        const auto comma = s.find(',', at);
        const auto item = trim(s.substr(at, comma == std::string_view::npos ? std::string_view::npos : comma - at));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        at = comma + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
    T v{};
    const auto s = trim(value);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw Error("config: invalid value '" + s + "' for " + std::string(key));
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
    const auto s = trim(value);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw Error("config: invalid boolean '" + s + "' for " + std::string(key));
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

fs::path require_out(const std::string& out) {
    if (out.empty()) throw Error("--out is required");
    fs::create_directories(out);
    return out;
}

Corpus speaker_subset(const Corpus& corpus, const std::string& speaker) {
    std::vector<Recording> recs;
    for (const auto& r : corpus.recordings) {
        if (r.speaker_id() == speaker) recs.push_back(r);
    }
    return make_corpus(std::move(recs));
}

/// Loads a manifest, trims keep intervals and resamples to the canonical rate.
Corpus load_canonical(const std::string& manifest) {
    if (manifest.empty()) throw Error("--manifest is required");
    const Corpus raw = load_manifest_file(manifest);
    std::vector<Recording> recs;
    for (const auto& r : raw.recordings) {
        Recording rec = r;
        if (const auto* e = raw.entry_for(r.speaker_id(), r.task_id()); e && !e->keep_intervals.empty()) {
            rec = apply_keep_intervals(rec, e->keep_intervals);
        }
        if (rec.sample_rate() != kCanonicalRate) rec = resample_to_canonical(rec);
        recs.push_back(std::move(rec));
    }
    return make_corpus(std::move(recs), raw.entries);
}

std::vector<std::string> prepared_speakers(const fs::path& data) {
    const auto doc = json::parse(read_text(data / "speakers.json"));
    return doc.get<std::vector<std::string>>();
}

std::string tasks_json(const Corpus& c) {
    json tasks = json::array();
    for (const auto& r : c.recordings) tasks.push_back(r.task_id());
    return tasks.dump();
}

struct Common {
    std::string manifest;
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<int> hop;
    std::optional<int> n_mask;
    std::string out;
};

RunConfig resolve(const Common& c, const std::optional<fs::path>& inherited = std::nullopt) {
    RunConfig cfg;
    if (inherited && fs::exists(*inherited)) cfg = parse_run_config(read_text(*inherited));
    if (!c.config_file.empty()) cfg = parse_run_config(read_text(c.config_file), cfg);
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, trim(std::string_view(kv).substr(0, eq)), std::string_view(kv).substr(eq + 1));
    }
    if (c.seed) cfg.model.seed = *c.seed;
    if (c.hop) cfg.hop = static_cast<std::size_t>(*c.hop);
    if (c.n_mask) cfg.model.n_mask = *c.n_mask;
    validate(cfg.model);
    if (cfg.hop != 100 && cfg.hop != 200) throw Error("hop must be 100 or 200");
    if (!(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0)) throw Error("holdout_fraction must be in (0, 1)");
    return cfg;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_stats(const Common& c, std::ostream& out) {
    const Corpus corpus = load_manifest_file(c.manifest.empty() ? throw Error("--manifest is required") : c.manifest);
    const auto stats = corpus_stats(corpus);
    out << stats_to_json(stats);
    std::optional<DegreeHistogram> hist;
    if (std::any_of(corpus.recordings.begin(), corpus.recordings.end(),
                    [](const Recording& r) { return r.has_mistracking(); })) {
        hist = mistrack_degree_breakdown(corpus);
        out << histogram_to_json(*hist);
    }
    if (c.out.empty()) return;
    const auto dir = require_out(c.out);
    write_text(dir / "stats.json", stats_to_json(stats));
    write_text(dir / "stats.csv", stats_to_csv(stats));
    if (hist) {
        write_text(dir / "degrees.json", histogram_to_json(*hist));
        write_text(dir / "degrees.csv", histogram_to_csv(*hist));
    }
}

void cmd_prepare(const Common& c, std::ostream& out) {
    const RunConfig cfg = resolve(c);
    if (cfg.test_tasks.empty()) throw Error("prepare: no test tasks configured (set test_tasks)");
    const fs::path dir = require_out(c.out);
    const Corpus corpus = load_canonical(c.manifest);
    TaskSubstitutions subs;
    if (!cfg.substitutions.empty()) subs = parse_substitutions(read_text(cfg.substitutions));
    const auto split = split_by_tasks(corpus, cfg.test_tasks, subs);

    const auto speakers = corpus.speakers();
    for (const auto& s : speakers) {
        const Corpus train_all = speaker_subset(split.train, s);
        const Corpus test = speaker_subset(split.test, s);
        CorpusSplit fit{train_all, test};
        if (!cfg.early_stop_on_test) fit = carve_holdout(train_all, cfg.holdout_fraction);

        FrameDataset train{build_frames(fit.train.recordings, cfg.hop), {}, kFrameLength, cfg.hop, false};
        FrameDataset holdout{build_frames(fit.test.recordings, cfg.hop), {}, kFrameLength, cfg.hop, false};
        FrameDataset test_ds{build_frames(test.recordings, kFrameLength), {}, kFrameLength, kFrameLength, false};
        if (train.frames.empty() || holdout.frames.empty() || test_ds.frames.empty()) {
            throw Error("prepare: speaker " + s + " has an empty train, holdout or test split");
        }
        const Normalizer nrm = fit_normalizer(train.frames);
        train.frames = normalize(std::move(train.frames), nrm);
        holdout.frames = normalize(std::move(holdout.frames), nrm);
        train.normalizer = holdout.normalizer = test_ds.normalizer = nrm;
        train.normalized = holdout.normalized = true;

        const fs::path sdir = dir / s;
        fs::create_directories(sdir);
        save_dataset(sdir / "train", train);
        save_dataset(sdir / "holdout", holdout);
        save_dataset(sdir / "test", test_ds);
        write_text(sdir / "split.json", "{\"train\": " + tasks_json(fit.train) + ", \"holdout\": " +
                                            tasks_json(fit.test) + ", \"test\": " + tasks_json(test) + "}\n");
        out << s << ": " << train.frames.size() << " train, " << holdout.frames.size() << " holdout, "
            << test_ds.frames.size() << " test frames\n";
    }
    write_text(dir / "speakers.json", json(speakers).dump() + "\n");
    write_text(dir / "config.txt", run_config_to_text(cfg));
}

struct DataOptions {
    std::string data;
    std::string model;
    std::vector<std::string> inputs;
    int k = 3;
    bool exclude_related = false;
};

TrainOptions progress_options(const std::string& speaker, const fs::path& run_dir, std::ostream& out) {
    TrainOptions opts;
    opts.speaker_id = speaker;
    opts.run_dir = run_dir;
    opts.on_epoch = [&out, speaker](int epoch, double train, double holdout) {
        if (epoch == 1 || epoch % 10 == 0) {
            out << speaker << " epoch " << epoch << " train " << train << " holdout " << holdout << '\n';
        }
    };
    return opts;
}

void cmd_train(const Common& c, const DataOptions& d, std::ostream& out) {
    if (d.data.empty()) throw Error("--data is required");
    const fs::path data = d.data;
    const RunConfig cfg = resolve(c, data / "config.txt");
    const fs::path dir = require_out(c.out);
    write_text(dir / "config.txt", run_config_to_text(cfg));
    for (const auto& s : prepared_speakers(data)) {
        const auto train = load_dataset(data / s / "train");
        const auto holdout = load_dataset(data / s / "holdout");
        const auto artifact = train_speaker_model(train, holdout, cfg.model, progress_options(s, dir / s, out));
        save_artifact_file(dir / s / "model.artrec", artifact);
        out << s << ": best epoch " << artifact.history.best_epoch << ", stopped at "
            << artifact.history.stopped_epoch << '\n';
    }
}

void cmd_sweep(const Common& c, const DataOptions& d, std::ostream& out) {
    if (d.data.empty()) throw Error("--data is required");
    const fs::path data = d.data;
    const RunConfig cfg = resolve(c, data / "config.txt");
    const fs::path dir = require_out(c.out);
    write_text(dir / "config.txt", run_config_to_text(cfg));
    for (const auto& s : prepared_speakers(data)) {
        const auto train = load_dataset(data / s / "train");
        const auto holdout = load_dataset(data / s / "holdout");
        const auto test = load_dataset(data / s / "test");
        const auto artifacts = sweep_n(train, holdout, cfg.model, progress_options(s, dir / s, out));
        for (const auto& a : artifacts) {
            save_artifact_file(dir / s / ("n" + std::to_string(a.config.n_mask)) / "model.artrec", a);
        }
        const auto best = select_model(artifacts, test.frames);
        save_artifact_file(dir / s / "model.artrec", best);
        json sel{{"speaker", s}, {"selected_n", best.selection.selected}, {"score", best.selection.score}};
        json cands = json::array();
        for (std::size_t i = 0; i < best.selection.candidates_n.size(); ++i) {
            cands.push_back({{"n", best.selection.candidates_n[i]}, {"score", best.selection.candidate_scores[i]}});
        }
        sel["candidates"] = cands;
        write_text(dir / s / "selection.json", sel.dump(2) + "\n");
        out << s << ": selected N=" << best.selection.selected << " (score " << best.selection.score << ")\n";
    }
}

void cmd_evaluate(const Common& c, const DataOptions& d, std::ostream& out) {
    if (d.model.empty() || d.data.empty()) throw Error("evaluate needs --model and --data");
    if (d.k < 1 || d.k > kNumPellets - 1) throw Error("--k must be in 1..7");
    const fs::path dir = require_out(c.out);
    const auto artifact = load_artifact_file(d.model);
    fs::path test_dir = d.data;
    if (fs::exists(test_dir / "test")) test_dir /= "test";
    const auto test = load_dataset(test_dir);
    if (test.normalized) throw Error("evaluate expects a millimetre-space test dataset");
    const auto predictor = model_predictor(artifact);

    EvalReport report;
    report.provenance = provenance_of(artifact);
    for (int k = 1; k <= kNumPellets - 1; ++k) {
        report.levels.push_back(evaluate_level(predictor, test.frames, k));
        out << "k=" << k << " avg_x " << report.levels.back().avg_x << " avg_y " << report.levels.back().avg_y << '\n';
    }
    report.per_pt = per_pt_breakdown(predictor, test.frames, d.k, d.exclude_related);

    for (const auto& plan : enumerate_combinations(d.k)) {
        if (d.exclude_related && is_related_combination(plan)) continue;
        const std::vector<Frame> one{test.frames.front()};
        const auto pred = predictor(one, plan);
        for (int ch : plan.channels()) {
            OverlayPanel panel;
            panel.channel = channel_name(ch);
            for (Eigen::Index t = 0; t < one[0].data.rows(); ++t) {
                panel.truth.push_back(one[0].data(t, ch));
                panel.predicted.push_back(pred[0](t, ch));
            }
            panel.highlighted.emplace_back(0, panel.truth.size());
            report.overlay.push_back(std::move(panel));
        }
        report.title = "Masked " + plan.label() + ", first test frame";
        break;
    }

    write_text(dir / "levels.json", levels_to_json(report));
    write_text(dir / "levels.csv", levels_to_csv(report));
    write_text(dir / "per_pt.json", per_pt_to_json(report));
    write_text(dir / "per_pt.csv", per_pt_to_csv(report));
    write_text(dir / "levels.svg", emit_plot(report, "levels"));
    write_text(dir / "per_pt.svg", emit_plot(report, "per_pt"));
    if (!report.overlay.empty()) write_text(dir / "overlay.svg", emit_plot(report, "overlay"));
}

int cmd_reconstruct(const Common& c, const DataOptions& d, std::ostream& out, std::ostream& err) {
    if (d.model.empty()) throw Error("--model is required");
    if (d.inputs.empty() && c.manifest.empty()) throw Error("reconstruct needs --input files or --manifest");
    const fs::path dir = require_out(c.out);
    const auto artifact = load_artifact_file(d.model);
    const WindowModel model = artifact_window_model(artifact);
    const std::size_t hop = c.hop ? static_cast<std::size_t>(*c.hop) : kFrameLength / 2;
    if (hop != 100 && hop != 200) throw Error("hop must be 100 or 200");

    std::vector<std::pair<std::string, Recording>> jobs;
    for (const auto& in : d.inputs) {
        Recording rec = read_trajectory(in, TrajectoryFileDefaults{artifact.speaker_id, fs::path(in).stem().string()});
        if (rec.sample_rate() != kCanonicalRate) rec = resample_to_canonical(rec);
        jobs.emplace_back(fs::path(in).stem().string(), std::move(rec));
    }
    if (!c.manifest.empty()) {
        const Corpus corpus = load_canonical(c.manifest);
        const auto report = retrieval_accounting(corpus);
        write_text(dir / "accounting.json", accounting_to_json(report));
        write_text(dir / "accounting.csv", accounting_to_csv(report));
        for (const auto& r : corpus.recordings) jobs.emplace_back(r.speaker_id() + "_" + r.task_id(), r);
    }

    int failures = 0;
    for (const auto& [name, rec] : jobs) {
        try {
            const auto result = reconstruct(rec, model, hop);
            write_trajectory(dir / (name + ".txt"), result.repaired);
            write_text(dir / (name + ".provenance.json"), provenance_to_json(rec, result, provenance_of(artifact)));
            std::size_t replaced = 0;
            for (const auto& list : result.replaced) replaced += list.size();
            out << name << ": repaired " << replaced << " intervals\n";
        } catch (const RefusalError& e) {
            err << "error: " << e.what() << '\n';
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}

struct SynthOptions {
    std::size_t recordings = 20;
    double duration = 10.0;
    int latent_dim = 4;
    double noise = 0.01;
    bool corrupt = false;
    std::size_t gaps = 3;
};

void cmd_synth(const Common& c, const SynthOptions& o, std::ostream& out) {
    const fs::path dir = require_out(c.out);
    SynthConfig cfg;
    cfg.n_recordings = o.recordings;
    cfg.duration_s = o.duration;
    cfg.latent_dim = o.latent_dim;
    cfg.noise_std = o.noise;
    cfg.seed = c.seed.value_or(0);
    const auto synth = generate_corpus(cfg);

    auto write_set = [&](const fs::path& sub, const std::vector<Recording>& recs) {
        fs::create_directories(dir / sub);
        std::vector<CorpusEntry> entries;
        for (const auto& r : recs) {
            const std::string file = r.task_id() + ".txt";
            write_trajectory(dir / sub / file, r);
            entries.push_back({file, r.speaker_id(), r.task_id(), TaskKind::Verbal, {}});
        }
        write_text(dir / sub / "manifest.json", write_manifest(entries));
    };
    write_set("clean", synth.corpus.recordings);

    json mixing = json::array();
    for (Eigen::Index i = 0; i < synth.mixing.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < synth.mixing.cols(); ++j) row.push_back(synth.mixing(i, j));
        mixing.push_back(row);
    }
    json truth{{"seed", cfg.seed},
               {"n_recordings", cfg.n_recordings},
               {"duration_s", cfg.duration_s},
               {"latent_dim", cfg.latent_dim},
               {"max_latent_hz", cfg.max_latent_hz},
               {"mixing_condition_bound", cfg.mixing_condition_bound},
               {"noise_std", cfg.noise_std},
               {"mixing", mixing},
               {"offsets", std::vector<double>(synth.offsets.data(), synth.offsets.data() + synth.offsets.size())}};

    if (o.corrupt) {
        CorruptionSpec spec;
        spec.gaps_per_recording = o.gaps;
        Rng rng(cfg.seed ^ 0xc0447u);
        std::vector<Recording> corrupted;
        json gaps = json::array();
        for (const auto& r : synth.corpus.recordings) {
            auto cr = inject_mistracking(r, spec, rng);
            for (const auto& g : cr.gaps) {
                gaps.push_back({{"task", r.task_id()}, {"pellets", g.pellets.names()}, {"start", g.start},
                                {"length", g.length}});
            }
            corrupted.push_back(std::move(cr.corrupted));
        }
        write_set("corrupted", corrupted);
        truth["gaps"] = gaps;
    }
    write_text(dir / "truth.json", truth.dump(2) + "\n");
    out << "wrote " << cfg.n_recordings << " recordings to " << dir.string() << '\n';
}

void cmd_bench(const Common& c, const DataOptions& d, std::size_t gaps, std::ostream& out) {
    const fs::path dir = require_out(c.out);
    const Corpus truth = load_canonical(c.manifest);
    std::vector<RepairMethod> methods{interpolation_method(Interpolation::Linear),
                                      interpolation_method(Interpolation::Cubic)};
    const std::size_t hop = c.hop ? static_cast<std::size_t>(*c.hop) : kFrameLength / 2;
    if (!d.model.empty()) methods.push_back(model_method(load_artifact_file(d.model), hop));
    CorruptionSpec spec;
    spec.gaps_per_recording = gaps;
    const auto report = benchmark(truth, methods, spec, c.seed.value_or(0));
    write_text(dir / "bench.json", benchmark_to_json(report));
    write_text(dir / "bench.csv", benchmark_to_csv(report));
    out << benchmark_to_csv(report);
}

}  // namespace

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    auto& m = cfg.model;
    if (key == "n_mask") {
        m.n_mask = parse_number<int>(key, value);
    } else if (key == "dilation_rates") {
        m.dilation_rates.clear();
        for (const auto& item : split_list(value)) m.dilation_rates.push_back(parse_number<int>(key, item));
    } else if (key == "mixing_width") {
        m.mixing_width = parse_number<int>(key, value);
    } else if (key == "recurrent_layers") {
        m.recurrent_layers = parse_number<int>(key, value);
    } else if (key == "recurrent_width") {
        m.recurrent_width = parse_number<int>(key, value);
    } else if (key == "learning_rate") {
        m.learning_rate = parse_number<double>(key, value);
    } else if (key == "batch_size") {
        m.batch_size = parse_number<int>(key, value);
    } else if (key == "patience") {
        m.patience = parse_number<int>(key, value);
    } else if (key == "max_epochs") {
        m.max_epochs = parse_number<int>(key, value);
    } else if (key == "seed") {
        m.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "per_sample_masking") {
        m.per_sample_masking = parse_bool(key, value);
    } else if (key == "hop") {
        cfg.hop = parse_number<std::size_t>(key, value);
    } else if (key == "test_tasks") {
        cfg.test_tasks = split_list(value);
    } else if (key == "substitutions") {
        cfg.substitutions = trim(value);
    } else if (key == "holdout_fraction") {
        cfg.holdout_fraction = parse_number<double>(key, value);
    } else if (key == "early_stop_on_test") {
        cfg.early_stop_on_test = parse_bool(key, value);
    } else {
        throw Error("config: unknown key '" + std::string(key) + "'");
    }
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
    std::size_t line_no = 0, at = 0;
    while (at < text.size()) {
        const auto nl = text.find('\n', at);
        std::string_view line = text.substr(at, nl == std::string_view::npos ? std::string_view::npos : nl - at);
        at = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
        try {
            set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return base;
}

std::string run_config_to_text(const RunConfig& cfg) {
    const auto& m = cfg.model;
    std::ostringstream out;
    out.precision(17);
    std::vector<std::string> dil;
    for (int d : m.dilation_rates) dil.push_back(std::to_string(d));
    out << "n_mask = " << m.n_mask << '\n'
        << "dilation_rates = " << join(dil) << '\n'
        << "mixing_width = " << m.mixing_width << '\n'
        << "recurrent_layers = " << m.recurrent_layers << '\n'
        << "recurrent_width = " << m.recurrent_width << '\n'
        << "learning_rate = " << m.learning_rate << '\n'
        << "batch_size = " << m.batch_size << '\n'
        << "patience = " << m.patience << '\n'
        << "max_epochs = " << m.max_epochs << '\n'
        << "seed = " << m.seed << '\n'
        << "per_sample_masking = " << (m.per_sample_masking ? "true" : "false") << '\n'
        << "hop = " << cfg.hop << '\n'
        << "test_tasks = " << join(cfg.test_tasks) << '\n'
        << "substitutions = " << cfg.substitutions << '\n'
        << "holdout_fraction = " << cfg.holdout_fraction << '\n'
        << "early_stop_on_test = " << (cfg.early_stop_on_test ? "true" : "false") << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Masked-autoencoder reconstruction of mistracked articulatory trajectories", "artrec"};
    app.require_subcommand(1);

    Common common;
    DataOptions data;
    SynthOptions synth;
    std::size_t bench_gaps = 3;

    auto add_common = [&](CLI::App* sub, bool model_flags) {
        sub->add_option("--out", common.out, "Output directory");
        sub->add_option("--seed", common.seed, "Random seed");
        if (model_flags) {
            sub->add_option("--config", common.config_file, "key=value configuration file");
            sub->add_option("--set", common.sets, "Override one configuration key (key=value)");
            sub->add_option("--hop", common.hop, "Frame hop in samples")->check(CLI::IsMember({100, 200}));
            sub->add_option("--n-mask", common.n_mask, "Uniform pellet draws per training batch")
                ->check(CLI::Range(1, kNumPellets));
        }
    };

    auto* stats = app.add_subcommand("stats", "Corpus duration and mistracking statistics");
    stats->add_option("--manifest", common.manifest, "Corpus manifest (JSON)")->required();
    stats->add_option("--out", common.out, "Output directory");

    auto* prepare = app.add_subcommand("prepare", "Build framed, normalized train/holdout/test datasets");
    prepare->add_option("--manifest", common.manifest, "Corpus manifest (JSON)")->required();
    add_common(prepare, true);

    auto* train = app.add_subcommand("train", "Train one model per speaker");
    train->add_option("--data", data.data, "Directory written by prepare")->required();
    add_common(train, true);

    auto* sweep = app.add_subcommand("sweep", "Train N = 1..8 per speaker and select the best");
    sweep->add_option("--data", data.data, "Directory written by prepare")->required();
    add_common(sweep, true);

    auto* evaluate = app.add_subcommand("evaluate", "Masking-level and per-pellet PPMC reports");
    evaluate->add_option("--model", data.model, "Model artifact")->required();
    evaluate->add_option("--data", data.data, "Speaker directory written by prepare, or a test dataset")->required();
    evaluate->add_option("--k", data.k, "Masking level of the per-pellet report")->check(CLI::Range(1, 7));
    evaluate->add_flag("--exclude-related", data.exclude_related, "Skip related pellet combinations");
    evaluate->add_option("--out", common.out, "Output directory");

    auto* recon = app.add_subcommand("reconstruct", "Repair mistracked samples");
    recon->add_option("--model", data.model, "Model artifact")->required();
    recon->add_option("--input", data.inputs, "Trajectory files");
    recon->add_option("--manifest", common.manifest, "Repair a whole corpus and report recovered hours");
    recon->add_option("--hop", common.hop, "Window hop in samples")->check(CLI::IsMember({100, 200}));
    recon->add_option("--out", common.out, "Output directory");

    auto* syn = app.add_subcommand("synth", "Generate a synthetic corpus");
    add_common(syn, false);
    syn->add_option("--recordings", synth.recordings, "Number of recordings");
    syn->add_option("--duration", synth.duration, "Seconds per recording");
    syn->add_option("--latent-dim", synth.latent_dim, "Latent signals mixed into the 16 channels");
    syn->add_option("--noise", synth.noise, "Noise standard deviation relative to each channel");
    syn->add_flag("--corrupt", synth.corrupt, "Also write a copy with injected mistracking");
    syn->add_option("--gaps", synth.gaps, "Gaps per corrupted recording");

    auto* bench = app.add_subcommand("bench", "Compare repair methods on injected gaps");
    bench->add_option("--manifest", common.manifest, "Clean ground-truth corpus")->required();
    bench->add_option("--model", data.model, "Model artifact to include");
    bench->add_option("--gaps", bench_gaps, "Gaps per recording");
    bench->add_option("--hop", common.hop, "Window hop for the model")->check(CLI::IsMember({100, 200}));
    add_common(bench, false);

    std::vector<const char*> argv{"artrec"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*stats) cmd_stats(common, out);
        if (*prepare) cmd_prepare(common, out);
        if (*train) cmd_train(common, data, out);
        if (*sweep) cmd_sweep(common, data, out);
        if (*evaluate) cmd_evaluate(common, data, out);
        if (*recon) return cmd_reconstruct(common, data, out, err);
        if (*syn) cmd_synth(common, synth, out);
        if (*bench) cmd_bench(common, data, bench_gaps, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace artrec
