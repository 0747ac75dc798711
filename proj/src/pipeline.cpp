#include "artrec/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace artrec {

using nlohmann::json;

ResampledSeries resample(const ChannelMatrix& samples, const FlagMatrix& mistrack, double src_rate,
                         double target_rate) {
    const Eigen::Index n = samples.rows();
    if (n < 2) throw Error("resample: need at least two samples");
    if (!(src_rate > 0.0) || !(target_rate > 0.0)) throw Error("resample: rates must be positive");
    if (mistrack.rows() != n) throw Error("resample: flag rows do not match samples");

    const double last_time = static_cast<double>(n - 1) / src_rate;
    const auto out_n = static_cast<Eigen::Index>(std::floor(last_time * target_rate + 1e-9)) + 1;

    ResampledSeries out{ChannelMatrix(out_n, kNumChannels), FlagMatrix::Constant(out_n, kNumPellets, false)};
    for (Eigen::Index k = 0; k < out_n; ++k) {
        double u = static_cast<double>(k) * src_rate / target_rate;
        if (std::abs(u - std::round(u)) < 1e-9) u = std::round(u);
        auto i0 = static_cast<Eigen::Index>(std::floor(u));
        i0 = std::clamp<Eigen::Index>(i0, 0, n - 1);
        const double frac = std::clamp(u - static_cast<double>(i0), 0.0, 1.0);
        const bool single = frac == 0.0 || i0 == n - 1;
        const Eigen::Index i1 = single ? i0 : i0 + 1;
        for (int p = 0; p < kNumPellets; ++p) {
            out.mistrack(k, p) = mistrack(i0, p) || mistrack(i1, p);
        }
        for (int c = 0; c < kNumChannels; ++c) {
            if (out.mistrack(k, c / 2)) {
                out.samples(k, c) = std::numeric_limits<double>::quiet_NaN();
            } else if (single) {
                out.samples(k, c) = samples(i0, c);
            } else {
                out.samples(k, c) = (1.0 - frac) * samples(i0, c) + frac * samples(i1, c);
            }
        }
    }
    return out;
}

Recording resample_to_canonical(const Recording& rec) {
    if (rec.sample_rate() == kCanonicalRate) return rec;
    auto r = resample(rec.samples(), rec.mistrack(), rec.sample_rate(), kCanonicalRate);
    return Recording(rec.speaker_id(), rec.task_id(), kCanonicalRate, std::move(r.samples), std::move(r.mistrack));
}

Recording apply_keep_intervals(const Recording& rec, const std::vector<TimeInterval>& intervals) {
    if (intervals.empty()) throw Error("apply_keep_intervals: no intervals");
    const auto n = static_cast<long long>(rec.length());
    std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;
    long long prev_end = 0;
    for (const auto& [a, b] : intervals) {
        const auto start = std::llround(a * rec.sample_rate());
        const auto end = std::llround(b * rec.sample_rate());
        if (a < 0.0 || start >= end || end > n) {
            throw Error("apply_keep_intervals: interval [" + std::to_string(a) + ", " + std::to_string(b) +
                        ") is empty or outside the recording");
        }
        if (start < prev_end) {
            throw Error("apply_keep_intervals: intervals overlap or are unsorted at " + std::to_string(a) + " s");
        }
        spans.emplace_back(start, end);
        prev_end = end;
    }
    Eigen::Index total = 0;
    for (const auto& [s, e] : spans) total += e - s;
    ChannelMatrix samples(total, kNumChannels);
    FlagMatrix flags(total, kNumPellets);
    Eigen::Index at = 0;
    for (const auto& [s, e] : spans) {
        samples.middleRows(at, e - s) = rec.samples().middleRows(s, e - s);
        flags.middleRows(at, e - s) = rec.mistrack().middleRows(s, e - s);
        at += e - s;
    }
    return Recording(rec.speaker_id(), rec.task_id(), rec.sample_rate(), std::move(samples), std::move(flags));
}

std::size_t frame_count(std::size_t length, std::size_t window, std::size_t hop) {
    if (length < window) return 0;
    return (length - window) / hop + 1;
}

std::vector<Frame> frame_recording(const Recording& rec, Hop hop) {
    return frame_recording(rec, static_cast<std::size_t>(hop));
}

std::vector<Frame> frame_recording(const Recording& rec, std::size_t hop) {
    if (hop != static_cast<std::size_t>(Hop::NoOverlap) && hop != static_cast<std::size_t>(Hop::HalfOverlap)) {
        throw Error("frame_recording: hop must be 200 or 100, got " + std::to_string(hop));
    }
    const std::size_t count = frame_count(rec.length(), kFrameLength, hop);
    std::vector<Frame> frames;
    frames.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto start = static_cast<Eigen::Index>(i * hop);
        Frame f;
        f.data = rec.samples().middleRows(start, kFrameLength);
        f.mistrack = rec.mistrack().middleRows(start, kFrameLength);
        f.source = {rec.speaker_id(), rec.task_id()};
        f.start_index = i * hop;
        frames.push_back(std::move(f));
    }
    return frames;
}

std::vector<Frame> filter_clean(std::vector<Frame> frames) {
    std::erase_if(frames, [](const Frame& f) { return !f.clean(); });
    return frames;
}

std::vector<Frame> build_frames(const std::vector<Recording>& recordings, std::size_t hop) {
    std::vector<const Recording*> order;
    for (const auto& r : recordings) order.push_back(&r);
    std::sort(order.begin(), order.end(), [](const Recording* a, const Recording* b) {
        return std::tie(a->speaker_id(), a->task_id()) < std::tie(b->speaker_id(), b->task_id());
    });
    std::vector<Frame> out;
    for (const auto* r : order) {
        auto frames = filter_clean(frame_recording(*r, hop));
        std::move(frames.begin(), frames.end(), std::back_inserter(out));
    }
    return out;
}

// ============================================================================
// Normalization
// ============================================================================

Normalizer fit_normalizer(const std::vector<Frame>& frames) {
    if (frames.size() < 2) throw Error("fit_normalizer: need at least two frames");
    Eigen::Matrix<double, 1, kNumChannels> sum = Eigen::Matrix<double, 1, kNumChannels>::Zero();
    double count = 0.0;
    for (const auto& f : frames) {
        if (!f.clean()) throw Error("fit_normalizer: frame contains mistracked samples");
        sum += f.data.colwise().sum();
        count += static_cast<double>(f.data.rows());
    }
    Normalizer nrm;
    nrm.mean = sum / count;
    Eigen::Matrix<double, 1, kNumChannels> sq = Eigen::Matrix<double, 1, kNumChannels>::Zero();
    for (const auto& f : frames) {
        sq += (f.data.rowwise() - nrm.mean).array().square().matrix().colwise().sum();
    }
    nrm.std = (sq / count).array().sqrt().matrix();
    for (int c = 0; c < kNumChannels; ++c) {
        if (!(nrm.std(c) > 1e-12 * std::max(1.0, std::abs(nrm.mean(c))))) {
            throw Error("fit_normalizer: channel " + channel_name(c) + " has zero variance");
        }
    }
    return nrm;
}

ChannelMatrix normalize(const ChannelMatrix& series, const Normalizer& nrm) {
    return ((series.rowwise() - nrm.mean).array().rowwise() / nrm.std.array()).matrix();
}

ChannelMatrix denormalize(const ChannelMatrix& series, const Normalizer& nrm) {
    return ((series.array().rowwise() * nrm.std.array()).rowwise() + nrm.mean.array()).matrix();
}

std::vector<Frame> normalize(std::vector<Frame> frames, const Normalizer& nrm) {
    for (auto& f : frames) f.data = normalize(f.data, nrm);
    return frames;
}

// ============================================================================
// Dataset persistence
// ============================================================================

namespace {

void write_le_floats(std::ostream& out, const ChannelMatrix& m) {
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
        for (int c = 0; c < kNumChannels; ++c) {
            auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(t, c)));
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
            out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
        }
    }
}

json normalizer_to_json(const Normalizer& n) {
    return json{{"mean", std::vector<double>(n.mean.data(), n.mean.data() + kNumChannels)},
                {"std", std::vector<double>(n.std.data(), n.std.data() + kNumChannels)}};
}

Normalizer normalizer_from_json(const json& j) {
    Normalizer n;
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("std").get<std::vector<double>>();
    if (mean.size() != kNumChannels || sd.size() != kNumChannels) throw Error("normalizer must have 16 channels");
    for (int c = 0; c < kNumChannels; ++c) {
        n.mean(c) = mean[static_cast<std::size_t>(c)];
        n.std(c) = sd[static_cast<std::size_t>(c)];
        if (!(n.std(c) > 0.0)) throw Error("normalizer std must be positive");
    }
    return n;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const FrameDataset& ds) {
    std::filesystem::create_directories(dir);
    json prov = json::array();
    for (const auto& f : ds.frames) {
        prov.push_back({{"speaker", f.source.speaker_id}, {"task", f.source.task_id}, {"start", f.start_index}});
    }
    json meta{{"format", "artrec-frames"},
              {"version", 1},
              {"window", ds.window},
              {"hop", ds.hop},
              {"channels", kNumChannels},
              {"num_frames", ds.frames.size()},
              {"normalized", ds.normalized},
              {"normalizer", normalizer_to_json(ds.normalizer)},
              {"frames", prov}};
    {
        std::ofstream out(dir / "dataset.json", std::ios::trunc);
        if (!out) throw Error("cannot write " + (dir / "dataset.json").string());
        out << meta.dump(2) << '\n';
    }
    std::ofstream bin(dir / "frames.f32", std::ios::binary | std::ios::trunc);
    if (!bin) throw Error("cannot write " + (dir / "frames.f32").string());
    for (const auto& f : ds.frames) write_le_floats(bin, f.data);
    if (!bin) throw Error("failed writing frames.f32");
}

FrameDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "dataset.json");
    if (!in) throw Error("cannot open " + (dir / "dataset.json").string());
    json meta;
    try {
        in >> meta;
    } catch (const json::exception& e) {
        throw Error("dataset.json: " + std::string(e.what()));
    }
    FrameDataset ds;
    ds.window = meta.at("window").get<std::size_t>();
    ds.hop = meta.at("hop").get<std::size_t>();
    ds.normalized = meta.value("normalized", false);
    ds.normalizer = normalizer_from_json(meta.at("normalizer"));
    if (ds.window != kFrameLength) throw Error("dataset window must be 200");
    const auto n = meta.at("num_frames").get<std::size_t>();
    const auto& prov = meta.at("frames");
    if (prov.size() != n) throw Error("dataset.json frame list does not match num_frames");

    std::ifstream bin(dir / "frames.f32", std::ios::binary);
    if (!bin) throw Error("cannot open " + (dir / "frames.f32").string());
    const std::size_t per_frame = kFrameLength * kNumChannels;
    std::vector<std::uint32_t> raw(n * per_frame);
    bin.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
    if (static_cast<std::size_t>(bin.gcount()) != raw.size() * sizeof(std::uint32_t)) {
        throw Error("frames.f32 is truncated");
    }
    ds.frames.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Frame f;
        f.data.resize(kFrameLength, kNumChannels);
        f.mistrack = FlagMatrix::Constant(kFrameLength, kNumPellets, false);
        for (int t = 0; t < kFrameLength; ++t) {
            for (int c = 0; c < kNumChannels; ++c) {
                auto bits = raw[i * per_frame + static_cast<std::size_t>(t * kNumChannels + c)];
                if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
                f.data(t, c) = static_cast<double>(std::bit_cast<float>(bits));
            }
        }
        f.source = {prov[i].at("speaker").get<std::string>(), prov[i].at("task").get<std::string>()};
        f.start_index = prov[i].at("start").get<std::size_t>();
        ds.frames.push_back(std::move(f));
    }
    return ds;
}

// ============================================================================
// Splits
// ============================================================================

TaskSubstitutions parse_substitutions(std::string_view json_text) {
    TaskSubstitutions subs;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("substitutions are not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw Error("substitutions must be a JSON array of {speaker, task, replacement}");
    for (const auto& item : doc) {
        subs[{item.at("speaker").get<std::string>(), item.at("task").get<std::string>()}] =
            item.at("replacement").get<std::string>();
    }
    return subs;
}

CorpusSplit split_by_tasks(const Corpus& corpus, const std::vector<std::string>& test_tasks,
                           const TaskSubstitutions& substitutions) {
    std::set<std::pair<std::string, std::string>> test_keys;
    for (const auto& speaker : corpus.speakers()) {
        auto has = [&](const std::string& task) {
            return std::any_of(corpus.recordings.begin(), corpus.recordings.end(), [&](const Recording& r) {
                return r.speaker_id() == speaker && r.task_id() == task;
            });
        };
        for (const auto& task : test_tasks) {
            if (has(task)) {
                test_keys.emplace(speaker, task);
                continue;
            }
            const auto it = substitutions.find({speaker, task});
            if (it == substitutions.end()) {
                throw Error("speaker " + speaker + " has no task " + task + " and no substitution was given");
            }
            if (!has(it->second)) {
                throw Error("speaker " + speaker + ": substitute task " + it->second + " for " + task +
                            " is not in the corpus");
            }
            test_keys.emplace(speaker, it->second);
        }
    }
    std::vector<Recording> train, test;
    for (const auto& r : corpus.recordings) {
        (test_keys.count({r.speaker_id(), r.task_id()}) ? test : train).push_back(r);
    }
    std::vector<CorpusEntry> train_entries, test_entries;
    for (const auto& e : corpus.entries) {
        (test_keys.count({e.speaker, e.task}) ? test_entries : train_entries).push_back(e);
    }
    return {make_corpus(std::move(train), std::move(train_entries)),
            make_corpus(std::move(test), std::move(test_entries))};
}

CorpusSplit carve_holdout(const Corpus& corpus, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error("carve_holdout: fraction must be in (0, 1)");
    std::vector<Recording> keep, hold;
    for (const auto& speaker : corpus.speakers()) {
        std::vector<const Recording*> mine;
        for (const auto& r : corpus.recordings) {
            if (r.speaker_id() == speaker) mine.push_back(&r);
        }
        const std::size_t n = mine.size();
        std::size_t n_hold = n < 2 ? 0 : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * n)));
        std::set<std::size_t> picks;
        for (std::size_t j = 0; j < n_hold; ++j) {
            picks.insert(static_cast<std::size_t>((static_cast<double>(j) + 0.5) * static_cast<double>(n) /
                                                  static_cast<double>(n_hold)));
        }
        for (std::size_t i = 0; i < n; ++i) (picks.count(i) ? hold : keep).push_back(*mine[i]);
    }
    return {make_corpus(std::move(keep)), make_corpus(std::move(hold))};
}

}  // namespace artrec
