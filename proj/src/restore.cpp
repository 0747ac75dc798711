#include "artrec/restore.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "artrec/evalsuite.hpp"
#include "json.hpp"

namespace artrec {

using nlohmann::json;

GapList detect_gaps(const Recording& rec) {
    GapList gaps;
    const auto& f = rec.mistrack();
    for (int p = 0; p < kNumPellets; ++p) {
        std::size_t t = 0;
        const auto n = rec.length();
        while (t < n) {
            if (!f(static_cast<Eigen::Index>(t), p)) {
                ++t;
                continue;
            }
            const std::size_t start = t;
            while (t < n && f(static_cast<Eigen::Index>(t), p)) ++t;
            gaps[static_cast<std::size_t>(p)].push_back({start, t});
        }
    }
    return gaps;
}

bool RecoveryPolicy::supports(std::uint8_t flagged) const {
    const MaskPlan set(flagged);
    if (set.size() > max_concurrent) return false;
    return allow_related || !is_related_combination(set);
}

void check_supported(const Recording& rec, const RecoveryPolicy& policy) {
    const auto n = rec.length();
    std::size_t t = 0;
    while (t < n) {
        if (policy.supports(flagged_mask_at(rec, t))) {
            ++t;
            continue;
        }
        const std::size_t start = t;
        std::uint8_t offending = 0;
        while (t < n && !policy.supports(flagged_mask_at(rec, t))) offending |= flagged_mask_at(rec, t++);
        const MaskPlan pellets(offending);
        std::ostringstream msg;
        msg.setf(std::ios::fixed);
        msg.precision(3);
        msg << "refusing to reconstruct " << rec.speaker_id() << '/' << rec.task_id() << ": pellets "
            << pellets.label() << " are mistracked together over samples [" << start << ", " << t << ") ("
            << static_cast<double>(start) / rec.sample_rate() << "-" << static_cast<double>(t) / rec.sample_rate()
            << " s), "
            << (pellets.size() > policy.max_concurrent ? "more concurrent pellets than supported"
                                                       : "a related combination the model cannot recover");
        throw RefusalError(msg.str(), {start, t}, pellets);
    }
}

std::vector<std::size_t> window_starts(std::size_t length, std::size_t window, std::size_t hop) {
    if (hop == 0 || window == 0) throw Error("window_starts: window and hop must be positive");
    if (length < window) throw Error("recording of " + std::to_string(length) + " samples is shorter than one window");
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + window <= length; s += hop) starts.push_back(s);
    if (starts.back() + window < length) starts.push_back(length - window);
    return starts;
}

ChannelMatrix stitch(const std::vector<WindowPrediction>& windows, std::size_t total_length) {
    // Running mean, so identical predictions come back bit-for-bit.
    ChannelMatrix mean = ChannelMatrix::Zero(static_cast<Eigen::Index>(total_length), kNumChannels);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total_length));
    for (const auto& w : windows) {
        const auto len = static_cast<std::size_t>(w.values.rows());
        if (w.start + len > total_length) throw Error("stitch: window extends past the end");
        for (Eigen::Index i = 0; i < w.values.rows(); ++i) {
            const Eigen::Index t = static_cast<Eigen::Index>(w.start) + i;
            count(t) += 1.0;
            mean.row(t) += (w.values.row(i) - mean.row(t)) / count(t);
        }
    }
    for (Eigen::Index t = 0; t < count.size(); ++t) {
        if (count(t) == 0.0) throw Error("stitch: sample " + std::to_string(t) + " is not covered by any window");
    }
    return mean;
}

WindowModel artifact_window_model(const ModelArtifact& artifact, int batch_size) {
    auto shared = std::make_shared<const ModelArtifact>(artifact);
    return [shared, batch_size](const std::vector<ChannelMatrix>& windows, const std::vector<MaskPlan>& plans) {
        const ModelArtifact& a = *shared;
        if (windows.size() != plans.size()) throw Error("window model: plans do not match windows");
        std::vector<ChannelMatrix> out;
        out.reserve(windows.size());
        for (std::size_t start = 0; start < windows.size(); start += static_cast<std::size_t>(batch_size)) {
            const std::size_t end = std::min(windows.size(), start + static_cast<std::size_t>(batch_size));
            const int steps = static_cast<int>(windows[start].rows());
            SequenceBatch<float> batch(static_cast<int>(end - start), steps, kNumChannels);
            std::vector<MaskPlan> chunk_plans;
            for (std::size_t i = start; i < end; ++i) {
                ChannelMatrix norm = normalize(windows[i], a.normalizer);
                for (int c : plans[i].channels()) norm.col(c).setZero();
                const int b = static_cast<int>(i - start);
                for (int t = 0; t < steps; ++t) batch.data.row(batch.row(t, b)) = norm.row(t).cast<float>();
                chunk_plans.push_back(plans[i]);
            }
            const auto masked = mask_batch<float>(batch, chunk_plans, a.params.mask_token);
            const auto pred = forward(a.params, masked);
            for (int b = 0; b < pred.batch; ++b) out.push_back(denormalize(unpack_sequence(pred, b), a.normalizer));
        }
        return out;
    };
}

RestoreResult reconstruct(const Recording& rec, const WindowModel& model, std::size_t hop,
                          const RecoveryPolicy& policy) {
    const auto n = rec.length();
    if (n < static_cast<std::size_t>(kFrameLength)) {
        throw Error("reconstruct: recording " + rec.speaker_id() + "/" + rec.task_id() + " has " + std::to_string(n) +
                    " samples, fewer than one 200-sample window");
    }
    check_supported(rec, policy);
    GapList gaps = detect_gaps(rec);
    if (!rec.has_mistracking()) return {rec, gaps};

    const auto starts = window_starts(n, kFrameLength, hop);
    std::vector<ChannelMatrix> inputs;
    std::vector<MaskPlan> plans;
    std::vector<std::size_t> model_windows;
    std::vector<WindowPrediction> windows;
    for (std::size_t s : starts) {
        const auto rows = rec.mistrack().middleRows(static_cast<Eigen::Index>(s), kFrameLength);
        MaskPlan plan;
        for (int p = 0; p < kNumPellets; ++p) {
            if (rows.col(p).any()) plan.insert(static_cast<PelletId>(p));
        }
        WindowPrediction w{s, rec.samples().middleRows(static_cast<Eigen::Index>(s), kFrameLength)};
        if (!plan.empty()) {
            model_windows.push_back(windows.size());
            inputs.push_back(w.values);
            plans.push_back(plan);
        }
        windows.push_back(std::move(w));
    }
    const auto predictions = model(inputs, plans);
    if (predictions.size() != inputs.size()) throw Error("reconstruct: model returned the wrong number of windows");
    for (std::size_t i = 0; i < model_windows.size(); ++i) {
        if (predictions[i].rows() != kFrameLength) throw Error("reconstruct: model returned a malformed window");
        windows[model_windows[i]].values = predictions[i];
    }
    const ChannelMatrix stitched = stitch(windows, n);

    ChannelMatrix out = rec.samples();
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(n); ++t) {
        for (int c = 0; c < kNumChannels; ++c) {
            if (rec.mistrack()(t, c / 2)) out(t, c) = stitched(t, c);
        }
    }
    Recording repaired(rec.speaker_id(), rec.task_id(), rec.sample_rate(), std::move(out),
                       FlagMatrix::Constant(static_cast<Eigen::Index>(n), kNumPellets, false));
    return {std::move(repaired), std::move(gaps)};
}

RestoreResult reconstruct(const Recording& rec, const ModelArtifact& artifact, std::size_t hop,
                          const RecoveryPolicy& policy) {
    return reconstruct(rec, artifact_window_model(artifact), hop, policy);
}

std::string provenance_to_json(const Recording& source, const RestoreResult& result, const Provenance& model) {
    json replaced = json::object();
    for (auto p : kAllPellets) {
        const auto& list = result.replaced[static_cast<std::size_t>(p)];
        if (list.empty()) continue;
        json ivs = json::array();
        for (const auto& iv : list) {
            ivs.push_back({{"start_sample", iv.start},
                           {"end_sample", iv.end},
                           {"start_s", static_cast<double>(iv.start) / source.sample_rate()},
                           {"end_s", static_cast<double>(iv.end) / source.sample_rate()}});
        }
        replaced[std::string(pellet_name(p))] = ivs;
    }
    return json{{"speaker", source.speaker_id()},
                {"task", source.task_id()},
                {"sample_rate", source.sample_rate()},
                {"model", {{"speaker", model.speaker}, {"n_mask", model.n_mask}, {"seed", model.seed}}},
                {"replaced", replaced}}
               .dump(2) +
           "\n";
}

AccountingReport retrieval_accounting(const Corpus& corpus, const RecoveryPolicy& policy) {
    if (corpus.recordings.empty()) throw Error("retrieval_accounting: empty corpus");
    double clean_s = 0.0, affected_s = 0.0, lost_s = 0.0;
    AccountingReport r;
    for (const auto& rec : corpus.recordings) {
        const double d = recording_duration(rec);
        if (!rec.has_mistracking()) {
            clean_s += d;
            continue;
        }
        affected_s += d;
        bool ok = true;
        for (std::size_t t = 0; t < rec.length() && ok; ++t) ok = policy.supports(flagged_mask_at(rec, t));
        if (ok) {
            ++r.recoverable_recordings;
        } else {
            lost_s += d;
            ++r.unrecoverable_recordings;
        }
    }
    r.clean_hours = clean_s / 3600.0;
    r.mistracked_hours = affected_s / 3600.0;
    r.unrecoverable_hours = lost_s / 3600.0;
    r.recovered_hours = (affected_s - lost_s) / 3600.0;
    r.usable_hours_after = (clean_s + affected_s - lost_s) / 3600.0;
    return r;
}

std::string accounting_to_json(const AccountingReport& r) {
    return json{{"clean_hours", round_to(r.clean_hours, 2)},
                {"mistracked_hours", round_to(r.mistracked_hours, 2)},
                {"unrecoverable_hours", round_to(r.unrecoverable_hours, 2)},
                {"recovered_hours", round_to(r.recovered_hours, 2)},
                {"usable_hours_after", round_to(r.usable_hours_after, 2)},
                {"recoverable_recordings", r.recoverable_recordings},
                {"unrecoverable_recordings", r.unrecoverable_recordings}}
               .dump(2) +
           "\n";
}

std::string accounting_to_csv(const AccountingReport& r) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << "clean_hours,mistracked_hours,unrecoverable_hours,recovered_hours,usable_hours_after\n"
        << r.clean_hours << ',' << r.mistracked_hours << ',' << r.unrecoverable_hours << ',' << r.recovered_hours
        << ',' << r.usable_hours_after << '\n';
    return out.str();
}

}  // namespace artrec
