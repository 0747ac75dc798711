#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "artrec/artifact.hpp"
#include "artrec/masking.hpp"

namespace artrec {

/// Pearson correlation. Throws when lengths differ, are below 2, or either
/// input has zero variance.
double ppmc(std::span<const double> a, std::span<const double> b);

/// Produces millimetre-space reconstructions of `frames` with the plan's
/// pellets hidden from the model. Stubs implement this in tests.
using FramePredictor = std::function<std::vector<ChannelMatrix>(const std::vector<Frame>&, const MaskPlan&)>;

/// Normalizes, masks with the learned token, runs the model and
/// denormalizes, `batch_size` frames at a time.
FramePredictor model_predictor(const ModelArtifact& artifact, int batch_size = 64);

struct ChannelScore {
    int channel = 0;
    double ppmc = 0.0;
};

struct PlanResult {
    MaskPlan plan;
    std::vector<ChannelScore> scores;  // masked channels only
};

/// PPMC per masked channel between predictions and ground truth, each
/// concatenated over all frames.
PlanResult evaluate_plan(const FramePredictor& predictor, const std::vector<Frame>& frames, const MaskPlan& plan);
std::vector<PlanResult> evaluate_plans(const FramePredictor& predictor, const std::vector<Frame>& frames,
                                       const std::vector<MaskPlan>& plans);

struct LevelResult {
    int k = 0;
    double avg_x = 0.0;
    double avg_y = 0.0;
    std::size_t plans = 0;
};

/// Mean over every masked X (resp. Y) channel score in the plan results.
LevelResult aggregate_level(int k, const std::vector<PlanResult>& results);
LevelResult evaluate_level(const FramePredictor& predictor, const std::vector<Frame>& frames, int k);

struct PtStats {
    double mean = 0.0;
    double max = 0.0;
    double min = 0.0;
    std::size_t count = 0;
};

struct PerPtReport {
    int k = 0;
    bool exclude_related = false;
    std::array<PtStats, kNumPellets> x{};
    std::array<PtStats, kNumPellets> y{};
    std::size_t plans_used = 0;
};

/// Per pellet and axis, statistics over the k-plans containing the pellet,
/// optionally skipping related combinations.
PerPtReport aggregate_per_pt(int k, const std::vector<PlanResult>& results, bool exclude_related);
PerPtReport per_pt_breakdown(const FramePredictor& predictor, const std::vector<Frame>& frames, int k,
                             bool exclude_related);

/// Pooled X/Y mean PPMC averaged over masking levels 1, 2 and 3.
double selection_score(const FramePredictor& predictor, const std::vector<Frame>& frames);

// ============================================================================
// Reports
// ============================================================================

struct Provenance {
    std::string speaker;
    int n_mask = 0;
    std::uint64_t seed = 0;
};

Provenance provenance_of(const ModelArtifact& artifact);

/// One channel of a trajectory overlay: ground truth against reconstruction.
struct OverlayPanel {
    std::string channel;
    double sample_rate = kCanonicalRate;
    std::vector<double> truth;
    std::vector<double> predicted;
    /// Sample ranges that were reconstructed, [start, end).
    std::vector<std::pair<std::size_t, std::size_t>> highlighted;
};

struct EvalReport {
    Provenance provenance;
    std::vector<LevelResult> levels;
    std::optional<PerPtReport> per_pt;
    std::vector<OverlayPanel> overlay;
    std::string title;
};

std::string levels_to_json(const EvalReport& report);
std::string levels_to_csv(const EvalReport& report);
std::string per_pt_to_json(const EvalReport& report);
std::string per_pt_to_csv(const EvalReport& report);

/// SVG rendering. Kinds: "levels" (PPMC vs number of masked PTs), "per_pt"
/// (PPMC vs masked PT with max/min error bars), "overlay" (one panel per
/// reconstructed channel).
std::string emit_plot(const EvalReport& report, std::string_view kind);

}  // namespace artrec
