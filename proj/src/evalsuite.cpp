#include "artrec/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "json.hpp"

namespace artrec {

using nlohmann::json;

double ppmc(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("ppmc: sequences differ in length");
    if (a.size() < 2) throw Error("ppmc: need at least two samples");
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
    const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
    if (*amin == *amax || *bmin == *bmax || saa == 0.0 || sbb == 0.0) {
        throw Error("ppmc: zero variance, correlation undefined");
    }
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

FramePredictor model_predictor(const ModelArtifact& artifact, int batch_size) {
    if (batch_size < 1) throw Error("model_predictor: batch size must be positive");
    auto shared = std::make_shared<const ModelArtifact>(artifact);
    return [shared, batch_size](const std::vector<Frame>& frames, const MaskPlan& plan) {
        const ModelArtifact& a = *shared;
        const RowVec<float> token = a.params.mask_token.row(0);
        std::vector<ChannelMatrix> out;
        out.reserve(frames.size());
        for (std::size_t start = 0; start < frames.size(); start += static_cast<std::size_t>(batch_size)) {
            const std::size_t end = std::min(frames.size(), start + static_cast<std::size_t>(batch_size));
            std::vector<Frame> chunk(frames.begin() + static_cast<std::ptrdiff_t>(start),
                                     frames.begin() + static_cast<std::ptrdiff_t>(end));
            for (auto& f : chunk) {
                f.data = normalize(f.data, a.normalizer);
                // Hidden channels may hold NaN or sentinels; the mask overwrites them.
                for (int c : plan.channels()) f.data.col(c).setZero();
            }
            auto batch = pack_frames<float>(chunk);
            apply_mask(batch, plan, token);
            const auto pred = forward(a.params, batch);
            for (int b = 0; b < pred.batch; ++b) out.push_back(denormalize(unpack_sequence(pred, b), a.normalizer));
        }
        return out;
    };
}

PlanResult evaluate_plan(const FramePredictor& predictor, const std::vector<Frame>& frames, const MaskPlan& plan) {
    if (frames.empty()) throw Error("evaluate_plan: no frames");
    if (plan.empty()) throw Error("evaluate_plan: plan masks no pellet");
    const auto pred = predictor(frames, plan);
    if (pred.size() != frames.size()) throw Error("evaluate_plan: predictor returned the wrong number of frames");
    std::size_t total = 0;
    for (const auto& f : frames) total += static_cast<std::size_t>(f.data.rows());

    PlanResult result{plan, {}};
    std::vector<double> truth(total), guess(total);
    for (int c : plan.channels()) {
        std::size_t at = 0;
        for (std::size_t i = 0; i < frames.size(); ++i) {
            const auto rows = frames[i].data.rows();
            if (pred[i].rows() != rows) throw Error("evaluate_plan: prediction length mismatch");
            for (Eigen::Index t = 0; t < rows; ++t) {
                truth[at] = frames[i].data(t, c);
                guess[at] = pred[i](t, c);
                ++at;
            }
        }
        const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
        if (*lo == *hi) throw Error("evaluate_plan: ground truth channel " + channel_name(c) + " has zero variance");
        const auto [plo, phi] = std::minmax_element(guess.begin(), guess.end());
        // A constant reconstruction carries no information about the channel.
        const double score = *plo == *phi ? 0.0 : ppmc(guess, truth);
        result.scores.push_back({c, score});
    }
    return result;
}

std::vector<PlanResult> evaluate_plans(const FramePredictor& predictor, const std::vector<Frame>& frames,
                                       const std::vector<MaskPlan>& plans) {
    std::vector<PlanResult> out;
    out.reserve(plans.size());
    for (const auto& plan : plans) out.push_back(evaluate_plan(predictor, frames, plan));
    return out;
}

LevelResult aggregate_level(int k, const std::vector<PlanResult>& results) {
    double sx = 0.0, sy = 0.0;
    std::size_t nx = 0, ny = 0;
    for (const auto& r : results) {
        for (const auto& s : r.scores) {
            if (channel_axis(s.channel) == Axis::X) {
                sx += s.ppmc;
                ++nx;
            } else {
                sy += s.ppmc;
                ++ny;
            }
        }
    }
    if (nx == 0 || ny == 0) throw Error("aggregate_level: no scores");
    return LevelResult{k, sx / static_cast<double>(nx), sy / static_cast<double>(ny), results.size()};
}

LevelResult evaluate_level(const FramePredictor& predictor, const std::vector<Frame>& frames, int k) {
    if (k < 1 || k > kNumPellets - 1) throw Error("evaluate_level: k must be in 1..7");
    return aggregate_level(k, evaluate_plans(predictor, frames, enumerate_combinations(k)));
}

PerPtReport aggregate_per_pt(int k, const std::vector<PlanResult>& results, bool exclude_related) {
    PerPtReport report;
    report.k = k;
    report.exclude_related = exclude_related;
    std::array<double, kNumPellets> sum_x{}, sum_y{};
    for (auto* stats : {&report.x, &report.y}) {
        for (auto& s : *stats) {
            s.max = -std::numeric_limits<double>::infinity();
            s.min = std::numeric_limits<double>::infinity();
        }
    }
    for (const auto& r : results) {
        if (exclude_related && is_related_combination(r.plan)) continue;
        ++report.plans_used;
        for (const auto& s : r.scores) {
            const auto p = static_cast<std::size_t>(channel_pellet(s.channel));
            const bool is_x = channel_axis(s.channel) == Axis::X;
            auto& st = is_x ? report.x[p] : report.y[p];
            (is_x ? sum_x : sum_y)[p] += s.ppmc;
            ++st.count;
            st.max = std::max(st.max, s.ppmc);
            st.min = std::min(st.min, s.ppmc);
        }
    }
    for (std::size_t p = 0; p < kNumPellets; ++p) {
        for (int axis = 0; axis < 2; ++axis) {
            auto& st = axis == 0 ? report.x[p] : report.y[p];
            const double sum = axis == 0 ? sum_x[p] : sum_y[p];
            if (st.count == 0) {
                st = PtStats{};
                continue;
            }
            st.mean = sum / static_cast<double>(st.count);
        }
    }
    return report;
}

PerPtReport per_pt_breakdown(const FramePredictor& predictor, const std::vector<Frame>& frames, int k,
                             bool exclude_related) {
    if (k < 1 || k > kNumPellets - 1) throw Error("per_pt_breakdown: k must be in 1..7");
    std::vector<MaskPlan> plans;
    for (const auto& plan : enumerate_combinations(k)) {
        if (!exclude_related || !is_related_combination(plan)) plans.push_back(plan);
    }
    return aggregate_per_pt(k, evaluate_plans(predictor, frames, plans), exclude_related);
}

double selection_score(const FramePredictor& predictor, const std::vector<Frame>& frames) {
    double total = 0.0;
    for (int k = 1; k <= 3; ++k) {
        const auto level = evaluate_level(predictor, frames, k);
        // Every plan masks as many X as Y channels, so pooling is the plain average.
        total += 0.5 * (level.avg_x + level.avg_y);
    }
    return total / 3.0;
}

// ============================================================================
// Reports
// ============================================================================

Provenance provenance_of(const ModelArtifact& a) { return {a.speaker_id, a.config.n_mask, a.config.seed}; }

namespace {

json provenance_json(const Provenance& p) { return {{"speaker", p.speaker}, {"n_mask", p.n_mask}, {"seed", p.seed}}; }

json stats_json(const PtStats& s) {
    return {{"mean", s.mean}, {"max", s.max}, {"min", s.min}, {"count", s.count}};
}

}  // namespace

std::string levels_to_json(const EvalReport& report) {
    json levels = json::array();
    for (const auto& l : report.levels) {
        levels.push_back({{"k", l.k}, {"avg_x", l.avg_x}, {"avg_y", l.avg_y}, {"plans", l.plans}});
    }
    return json{{"provenance", provenance_json(report.provenance)}, {"levels", levels}}.dump(2) + "\n";
}

std::string levels_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out.precision(6);
    out.setf(std::ios::fixed);
    out << "speaker,n_mask,seed,k,avg_x,avg_y,plans\n";
    for (const auto& l : report.levels) {
        out << report.provenance.speaker << ',' << report.provenance.n_mask << ',' << report.provenance.seed << ','
            << l.k << ',' << l.avg_x << ',' << l.avg_y << ',' << l.plans << '\n';
    }
    return out.str();
}

std::string per_pt_to_json(const EvalReport& report) {
    if (!report.per_pt) throw Error("report has no per-PT section");
    const auto& r = *report.per_pt;
    json pellets = json::array();
    for (auto p : kAllPellets) {
        const auto i = static_cast<std::size_t>(p);
        pellets.push_back({{"pellet", std::string(pellet_name(p))}, {"x", stats_json(r.x[i])}, {"y", stats_json(r.y[i])}});
    }
    return json{{"provenance", provenance_json(report.provenance)},
                {"k", r.k},
                {"exclude_related", r.exclude_related},
                {"plans_used", r.plans_used},
                {"pellets", pellets}}
               .dump(2) +
           "\n";
}

std::string per_pt_to_csv(const EvalReport& report) {
    if (!report.per_pt) throw Error("report has no per-PT section");
    const auto& r = *report.per_pt;
    std::ostringstream out;
    out.precision(6);
    out.setf(std::ios::fixed);
    out << "pellet,axis,mean,corr_max,corr_min,max,min,count\n";
    for (auto p : kAllPellets) {
        const auto i = static_cast<std::size_t>(p);
        for (int axis = 0; axis < 2; ++axis) {
            const auto& s = axis == 0 ? r.x[i] : r.y[i];
            out << pellet_name(p) << ',' << (axis == 0 ? 'x' : 'y') << ',' << s.mean << ',' << s.max - s.mean << ','
                << s.mean - s.min << ',' << s.max << ',' << s.min << ',' << s.count << '\n';
        }
    }
    return out.str();
}

}  // namespace artrec
