#include "artrec/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

// pchip.hpp calls unqualified isnan.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include "artrec/evalsuite.hpp"
#include "json.hpp"

namespace artrec {

using nlohmann::json;

namespace {

Rng derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(salt)};
    return Rng(seq);
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
    }
    return m;
}

Eigen::MatrixXd orthonormal_columns(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rows, cols, rng));
    return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

}  // namespace

void SynthConfig::validate() const {
    if (n_recordings == 0) throw Error("synth: n_recordings must be positive");
    if (!(duration_s > 0.0)) throw Error("synth: duration must be positive");
    if (latent_dim < 1 || latent_dim >= kNumChannels) throw Error("synth: latent_dim must be in 1..15");
    if (!(max_latent_hz > 0.0) || max_latent_hz > kCanonicalRate / 2.0) {
        throw Error("synth: max_latent_hz must be in (0, Nyquist]");
    }
    if (std::ceil(max_latent_hz * duration_s) - 1.0 < 1.0) {
        throw Error("synth: no frequency bin below max_latent_hz; lengthen the recordings");
    }
    if (!(mixing_condition_bound >= 1.0)) throw Error("synth: condition bound must be >= 1");
    if (!(noise_std >= 0.0)) throw Error("synth: noise_std must be non-negative");
    if (components < 1) throw Error("synth: components must be positive");
}

double condition_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    return s(0) / s(s.size() - 1);
}

SyntheticCorpus generate_corpus(const SynthConfig& cfg) {
    cfg.validate();
    const int L = cfg.latent_dim;
    Rng shared = derived_rng(cfg.seed, 0, 0x6d6978);

    // U diag(s) V^T with s in [1/bound, 1] bounds the condition number.
    const Eigen::MatrixXd u = orthonormal_columns(kNumChannels, L, shared);
    const Eigen::MatrixXd v = orthonormal_columns(L, L, shared);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd s(L);
    for (int i = 0; i < L; ++i) s(i) = i == 0 ? 1.0 : std::pow(cfg.mixing_condition_bound, -unit(shared));
    constexpr double kScaleMm = 10.0;
    SyntheticCorpus out;
    out.mixing = kScaleMm * u * s.asDiagonal() * v.transpose();
    out.offsets.resize(kNumChannels);
    std::uniform_real_distribution<double> offset(-60.0, 10.0);
    for (int c = 0; c < kNumChannels; ++c) out.offsets(c) = offset(shared);

    const auto n = static_cast<Eigen::Index>(std::llround(cfg.duration_s * kCanonicalRate));
    // Bin k has frequency k / duration; the top bin stays strictly below max_latent_hz.
    const double span_s = static_cast<double>(n) / kCanonicalRate;
    const int top_bin = static_cast<int>(std::ceil(cfg.max_latent_hz * span_s)) - 1;
    if (top_bin < 1) throw Error("synth: no frequency bin below max_latent_hz");

    std::vector<Recording> recs;
    recs.reserve(cfg.n_recordings);
    for (std::size_t r = 0; r < cfg.n_recordings; ++r) {
        Rng rng = derived_rng(cfg.seed, r + 1, 0x726563);
        std::uniform_int_distribution<int> bin(1, top_bin);
        std::uniform_real_distribution<double> amp(0.5, 1.0), phase(0.0, 2.0 * std::numbers::pi);
        std::normal_distribution<double> noise(0.0, 1.0);

        Eigen::MatrixXd latent = Eigen::MatrixXd::Zero(n, L);
        for (int l = 0; l < L; ++l) {
            for (int c = 0; c < cfg.components; ++c) {
                const double w = 2.0 * std::numbers::pi * bin(rng) / span_s;
                const double a = amp(rng), ph = phase(rng);
                for (Eigen::Index t = 0; t < n; ++t) {
                    latent(t, l) += a * std::sin(w * static_cast<double>(t) / kCanonicalRate + ph);
                }
            }
            auto col = latent.col(l);
            col.array() -= col.mean();
            const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
            if (sd > 0.0) col /= sd;
        }
        ChannelMatrix data = latent * out.mixing.transpose();
        for (int c = 0; c < kNumChannels; ++c) {
            auto col = data.col(c);
            const double mean = col.mean();
            const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n));
            for (Eigen::Index t = 0; t < n; ++t) col(t) += out.offsets(c) + cfg.noise_std * sd * noise(rng);
        }
        char task[16];
        std::snprintf(task, sizeof task, "t%03zu", r);
        recs.emplace_back(cfg.speaker, task, kCanonicalRate, std::move(data), FlagMatrix::Constant(n, kNumPellets, false));
    }
    out.corpus = make_corpus(std::move(recs));
    return out;
}

// ---------------------------------------------------------------------------
// Corruption
// ---------------------------------------------------------------------------

void CorruptionSpec::validate() const {
    double sum = 0.0;
    for (double p : degree_distribution) {
        if (!(p >= 0.0)) throw Error("corruption: probabilities must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw Error("corruption: degree distribution must sum to 1");
    if (!(min_gap_ms > 0.0) || !(max_gap_ms >= min_gap_ms)) throw Error("corruption: invalid gap duration range");
}

GapEvent sample_gap_event(const CorruptionSpec& spec, double sample_rate, Rng& rng) {
    std::discrete_distribution<int> bucket(spec.degree_distribution.begin(), spec.degree_distribution.end());
    const int degree = bucket(rng) + 1;
    std::array<int, kNumPellets> order;
    std::iota(order.begin(), order.end(), 0);
    GapEvent ev;
    do {
        std::shuffle(order.begin(), order.end(), rng);
        ev.pellets = MaskPlan{};
        for (int i = 0; i < degree; ++i) ev.pellets.insert(static_cast<PelletId>(order[static_cast<std::size_t>(i)]));
    } while (!spec.allow_related && is_related_combination(ev.pellets));
    std::uniform_real_distribution<double> ms(spec.min_gap_ms, spec.max_gap_ms);
    ev.length = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ms(rng) * sample_rate / 1000.0)));
    return ev;
}

CorruptedRecording inject_mistracking(const Recording& truth, const CorruptionSpec& spec, Rng& rng) {
    spec.validate();
    const std::size_t n = truth.length();
    std::vector<GapEvent> gaps;
    for (std::size_t g = 0; g < spec.gaps_per_recording; ++g) {
        GapEvent ev = sample_gap_event(spec, truth.sample_rate(), rng);
        if (ev.length + 2 > n) {
            throw Error("inject_mistracking: a " + std::to_string(ev.length) + "-sample gap does not fit in " +
                        truth.speaker_id() + "/" + truth.task_id());
        }
        std::uniform_int_distribution<std::size_t> pos(0, n - ev.length);
        bool placed = false;
        for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
            ev.start = pos(rng);
            placed = std::none_of(gaps.begin(), gaps.end(), [&](const GapEvent& o) {
                return ev.start < o.start + o.length + 1 && o.start < ev.start + ev.length + 1;
            });
        }
        if (!placed) throw Error("inject_mistracking: cannot place gap without overlap; too many gaps for the recording");
        gaps.push_back(ev);
    }
    std::sort(gaps.begin(), gaps.end(), [](const GapEvent& a, const GapEvent& b) { return a.start < b.start; });

    ChannelMatrix data = truth.samples();
    FlagMatrix flags = truth.mistrack();
    constexpr double kSentinel = 1.0e6;
    for (const auto& g : gaps) {
        for (auto p : g.pellets.pellets()) {
            const int pi = static_cast<int>(p);
            for (std::size_t t = g.start; t < g.start + g.length; ++t) {
                const auto ti = static_cast<Eigen::Index>(t);
                flags(ti, pi) = true;
                data(ti, channel_index(p, Axis::X)) = kSentinel;
                data(ti, channel_index(p, Axis::Y)) = kSentinel;
            }
        }
    }
    Recording corrupted(truth.speaker_id(), truth.task_id(), truth.sample_rate(), std::move(data), std::move(flags));
    return {std::move(corrupted), truth, std::move(gaps)};
}

// ---------------------------------------------------------------------------
// Interpolation baselines
// ---------------------------------------------------------------------------

Recording baseline_interpolate(const Recording& rec, Interpolation method) {
    const auto gaps = detect_gaps(rec);
    const auto n = static_cast<std::size_t>(rec.length());
    ChannelMatrix out = rec.samples();
    const auto& flags = rec.mistrack();
    constexpr std::size_t kCubicSupport = 4;

    for (auto p : kAllPellets) {
        const int pi = static_cast<int>(p);
        for (const auto& gap : gaps[static_cast<std::size_t>(pi)]) {
            const bool has_left = gap.start > 0, has_right = gap.end < n;
            if (!has_left && !has_right) {
                throw Error("baseline_interpolate: pellet " + std::string(pellet_name(p)) + " has no clean samples in " +
                            rec.speaker_id() + "/" + rec.task_id());
            }
            for (auto axis : {Axis::X, Axis::Y}) {
                const int c = channel_index(p, axis);
                auto value = [&](std::size_t t) { return rec.samples()(static_cast<Eigen::Index>(t), c); };
                if (!has_left || !has_right) {
                    const double v = has_left ? value(gap.start - 1) : value(gap.end);
                    for (std::size_t t = gap.start; t < gap.end; ++t) out(static_cast<Eigen::Index>(t), c) = v;
                    continue;
                }
                std::vector<double> xs, ys;
                if (method == Interpolation::Cubic) {
                    std::size_t t = gap.start;
                    while (t > 0 && gap.start - t < kCubicSupport && !flags(static_cast<Eigen::Index>(t - 1), pi)) --t;
                    for (; t < gap.start; ++t) {
                        xs.push_back(static_cast<double>(t));
                        ys.push_back(value(t));
                    }
                    for (t = gap.end; t < n && t - gap.end < kCubicSupport && !flags(static_cast<Eigen::Index>(t), pi);
                         ++t) {
                        xs.push_back(static_cast<double>(t));
                        ys.push_back(value(t));
                    }
                }
                if (xs.size() >= 4) {
                    boost::math::interpolators::pchip<std::vector<double>> spline(std::move(xs), std::move(ys));
                    for (std::size_t t = gap.start; t < gap.end; ++t) {
                        out(static_cast<Eigen::Index>(t), c) = spline(static_cast<double>(t));
                    }
                } else {
                    const double a = value(gap.start - 1), b = value(gap.end);
                    const double span = static_cast<double>(gap.end - gap.start + 1);
                    for (std::size_t t = gap.start; t < gap.end; ++t) {
                        const double frac = static_cast<double>(t - gap.start + 1) / span;
                        out(static_cast<Eigen::Index>(t), c) = a + (b - a) * frac;
                    }
                }
            }
        }
    }
    return Recording(rec.speaker_id(), rec.task_id(), rec.sample_rate(), std::move(out),
                     FlagMatrix::Constant(static_cast<Eigen::Index>(n), kNumPellets, false));
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

RepairMethod interpolation_method(Interpolation method) {
    return {method == Interpolation::Linear ? "linear" : "cubic",
            [method](const Recording& rec) { return baseline_interpolate(rec, method); }};
}

RepairMethod model_method(const ModelArtifact& artifact, std::size_t hop) {
    WindowModel model = artifact_window_model(artifact);
    return {"model", [model, hop](const Recording& rec) { return reconstruct(rec, model, hop).repaired; }};
}

GapBucket bucket_of(double duration_ms) {
    if (duration_ms < 150.0) return GapBucket::Short;
    if (duration_ms < 300.0) return GapBucket::Medium;
    return GapBucket::Long;
}

std::string_view bucket_name(GapBucket bucket) {
    switch (bucket) {
        case GapBucket::Short:
            return "lt150ms";
        case GapBucket::Medium:
            return "150to300ms";
        case GapBucket::Long:
            return "ge300ms";
    }
    return "?";
}

double fill_ppmc(const Recording& repaired, const Recording& truth, const GapEvent& gap, int channel) {
    const auto start = static_cast<Eigen::Index>(gap.start);
    const auto len = static_cast<Eigen::Index>(gap.length);
    std::vector<double> fill(gap.length), ref(gap.length);
    for (Eigen::Index i = 0; i < len; ++i) {
        fill[static_cast<std::size_t>(i)] = repaired.samples()(start + i, channel);
        ref[static_cast<std::size_t>(i)] = truth.samples()(start + i, channel);
    }
    const auto [lo, hi] = std::minmax_element(fill.begin(), fill.end());
    if (*lo == *hi) return 0.0;
    return ppmc(fill, ref);
}

BenchmarkReport benchmark(const Corpus& truth, const std::vector<RepairMethod>& methods, const CorruptionSpec& spec,
                          std::uint64_t seed) {
    spec.validate();
    if (methods.empty()) throw Error("benchmark: no methods");
    BenchmarkReport report;
    report.seed = seed;
    std::vector<std::array<double, 3>> sums(methods.size(), std::array<double, 3>{});
    for (const auto& m : methods) report.methods.push_back({m.name, {}, {}});

    for (std::size_t r = 0; r < truth.recordings.size(); ++r) {
        Rng rng = derived_rng(seed, r, 0x62656e);
        const auto c = inject_mistracking(truth.recordings[r], spec, rng);
        std::vector<Recording> repaired;
        bool refused = false;
        for (const auto& m : methods) {
            try {
                repaired.push_back(m.repair(c.corrupted));
            } catch (const RefusalError&) {
                refused = true;
                break;
            }
        }
        if (refused) {
            ++report.recordings_refused;
            continue;
        }
        ++report.recordings_used;
        for (const auto& gap : c.gaps) {
            const auto b = static_cast<std::size_t>(bucket_of(gap.duration_ms(c.truth.sample_rate())));
            ++report.gaps_per_bucket[b];
            ++report.gaps_total;
            for (std::size_t m = 0; m < methods.size(); ++m) {
                for (int ch : gap.pellets.channels()) {
                    sums[m][b] += fill_ppmc(repaired[m], c.truth, gap, ch);
                    ++report.methods[m].buckets[b].scores;
                }
            }
        }
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
        auto& ms = report.methods[m];
        double total = 0.0;
        for (std::size_t b = 0; b < 3; ++b) {
            total += sums[m][b];
            ms.overall.scores += ms.buckets[b].scores;
            if (ms.buckets[b].scores > 0) ms.buckets[b].mean_ppmc = sums[m][b] / static_cast<double>(ms.buckets[b].scores);
        }
        if (ms.overall.scores > 0) ms.overall.mean_ppmc = total / static_cast<double>(ms.overall.scores);
    }
    return report;
}

std::string benchmark_to_json(const BenchmarkReport& report) {
    json methods = json::array();
    for (const auto& m : report.methods) {
        json buckets = json::object();
        for (std::size_t b = 0; b < 3; ++b) {
            buckets[std::string(bucket_name(static_cast<GapBucket>(b)))] = {{"mean_ppmc", m.buckets[b].mean_ppmc},
                                                                            {"scores", m.buckets[b].scores}};
        }
        methods.push_back({{"method", m.method},
                           {"buckets", buckets},
                           {"overall", {{"mean_ppmc", m.overall.mean_ppmc}, {"scores", m.overall.scores}}}});
    }
    json gaps = json::object();
    for (std::size_t b = 0; b < 3; ++b) gaps[std::string(bucket_name(static_cast<GapBucket>(b)))] = report.gaps_per_bucket[b];
    return json{{"seed", report.seed},
                {"recordings_used", report.recordings_used},
                {"recordings_refused", report.recordings_refused},
                {"gaps_total", report.gaps_total},
                {"gaps_per_bucket", gaps},
                {"methods", methods}}
               .dump(2) +
           "\n";
}

std::string benchmark_to_csv(const BenchmarkReport& report) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(6);
    out << "method,bucket,mean_ppmc,scores,gaps\n";
    for (const auto& m : report.methods) {
        for (std::size_t b = 0; b < 3; ++b) {
            out << m.method << ',' << bucket_name(static_cast<GapBucket>(b)) << ',' << m.buckets[b].mean_ppmc << ','
                << m.buckets[b].scores << ',' << report.gaps_per_bucket[b] << '\n';
        }
        out << m.method << ",all," << m.overall.mean_ppmc << ',' << m.overall.scores << ',' << report.gaps_total << '\n';
    }
    return out.str();
}

}  // namespace artrec
