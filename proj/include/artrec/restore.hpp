#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "artrec/artifact.hpp"
#include "artrec/corpus_io.hpp"
#include "artrec/evalsuite.hpp"
#include "artrec/masking.hpp"

namespace artrec {

/// Half-open sample range [start, end).
struct SampleInterval {
    std::size_t start = 0;
    std::size_t end = 0;
    bool operator==(const SampleInterval&) const = default;
};

/// Per pellet, sorted disjoint runs of flagged samples.
using GapList = std::array<std::vector<SampleInterval>, kNumPellets>;

GapList detect_gaps(const Recording& rec);

/// Which concurrent mistrack sets the model can repair.
struct RecoveryPolicy {
    int max_concurrent = 3;
    bool allow_related = false;

    bool supports(std::uint8_t flagged_pellets) const;
};

/// Raised instead of filling a region the model cannot repair reliably.
class RefusalError : public Error {
public:
    RefusalError(const std::string& what, SampleInterval interval, MaskPlan pellets)
        : Error(what), interval_(interval), pellets_(pellets) {}
    SampleInterval interval() const { return interval_; }
    MaskPlan pellets() const { return pellets_; }

private:
    SampleInterval interval_;
    MaskPlan pellets_;
};

/// Throws RefusalError naming the first maximal run of samples whose flagged
/// set the policy does not support.
void check_supported(const Recording& rec, const RecoveryPolicy& policy = {});

/// Window starts at multiples of hop, plus a final window aligned to the end.
std::vector<std::size_t> window_starts(std::size_t length, std::size_t window, std::size_t hop);

struct WindowPrediction {
    std::size_t start = 0;
    ChannelMatrix values;
};

/// Per-sample mean over every window covering it. Throws on coverage holes.
ChannelMatrix stitch(const std::vector<WindowPrediction>& windows, std::size_t total_length);

/// Predicts a batch of windows (millimetres, hidden cells arbitrary) with the
/// given per-window plans. Every plan is non-empty.
using WindowModel =
    std::function<std::vector<ChannelMatrix>(const std::vector<ChannelMatrix>&, const std::vector<MaskPlan>&)>;

WindowModel artifact_window_model(const ModelArtifact& artifact, int batch_size = 64);

struct RestoreResult {
    Recording repaired;
    GapList replaced;
};

/// Repairs flagged samples only; every other sample is returned unchanged.
RestoreResult reconstruct(const Recording& rec, const WindowModel& model, std::size_t hop = kFrameLength / 2,
                          const RecoveryPolicy& policy = {});
RestoreResult reconstruct(const Recording& rec, const ModelArtifact& artifact, std::size_t hop = kFrameLength / 2,
                          const RecoveryPolicy& policy = {});

/// Sidecar JSON listing replaced intervals per pellet.
std::string provenance_to_json(const Recording& source, const RestoreResult& result, const Provenance& model);

struct AccountingReport {
    double clean_hours = 0.0;
    double mistracked_hours = 0.0;
    double unrecoverable_hours = 0.0;
    double recovered_hours = 0.0;
    double usable_hours_after = 0.0;
    std::size_t recoverable_recordings = 0;
    std::size_t unrecoverable_recordings = 0;
};

AccountingReport retrieval_accounting(const Corpus& corpus, const RecoveryPolicy& policy = {});

std::string accounting_to_json(const AccountingReport& report);
std::string accounting_to_csv(const AccountingReport& report);

}  // namespace artrec
