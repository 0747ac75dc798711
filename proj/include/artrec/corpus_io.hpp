#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "artrec/trajectory.hpp"

namespace artrec {

enum class TaskKind { Verbal, Nonverbal };

std::string_view task_kind_name(TaskKind kind);

/// Seconds, [start, end).
using TimeInterval = std::pair<double, double>;

struct CorpusEntry {
    std::string path;
    std::string speaker;
    std::string task;
    TaskKind kind = TaskKind::Verbal;
    std::vector<TimeInterval> keep_intervals;
};

/// Recordings are sorted by (speaker, task) and unique on that pair.
/// `entries` keeps every manifest row, including excluded nonverbal tasks.
struct Corpus {
    std::vector<Recording> recordings;
    std::vector<CorpusEntry> entries;

    const CorpusEntry* entry_for(const std::string& speaker, const std::string& task) const;
    std::vector<std::string> speakers() const;
};

/// Sorts and checks uniqueness of (speaker, task). Throws on duplicates.
Corpus make_corpus(std::vector<Recording> recordings, std::vector<CorpusEntry> entries = {});

// ---------------------------------------------------------------------------
// Trajectory files
// ---------------------------------------------------------------------------

/// Values at or above this magnitude are microbeam "pellet lost" sentinels.
inline constexpr double kMistrackSentinel = 900000.0;

struct TrajectoryFileDefaults {
    std::string speaker_id;
    std::string task_id;
    /// Used when neither a `# sample_rate:` line nor two time stamps are present.
    double sample_rate = kCanonicalRate;
};

/// Parses the tab-separated trajectory format. Optional leading `# key: value`
/// lines carry speaker, task and sample_rate; the header row names the time
/// column and all 16 channels. Sentinel or non-finite cells flag their pellet.
Recording parse_trajectory_file(std::string_view text, const TrajectoryFileDefaults& defaults = {});

/// Inverse of parse_trajectory_file. Flagged pellets are written as `nan`.
std::string write_trajectory_file(const Recording& rec);

Recording read_trajectory(const std::filesystem::path& path, const TrajectoryFileDefaults& defaults = {});
void write_trajectory(const std::filesystem::path& path, const Recording& rec);

/// Flags equal and every unflagged value bit-identical.
bool same_recording(const Recording& a, const Recording& b);

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

struct ManifestOptions {
    bool verbal_only = true;
};

std::vector<CorpusEntry> parse_manifest(std::string_view json_text);

/// Loads every listed recording; relative paths resolve against base_dir.
Corpus load_manifest(std::string_view json_text, const std::filesystem::path& base_dir,
                     const ManifestOptions& options = {});
Corpus load_manifest_file(const std::filesystem::path& path, const ManifestOptions& options = {});

std::string write_manifest(const std::vector<CorpusEntry>& entries);

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct StatsReport {
    double total_hours = 0.0;
    double clean_hours = 0.0;
    double pct_with_mistracking = 0.0;
    std::size_t recordings = 0;
};

struct DegreeHistogram {
    double one = 0.0;
    double two = 0.0;
    double three = 0.0;
    double more_than_three = 0.0;
    std::size_t affected_recordings = 0;
};

StatsReport corpus_stats(const Corpus& corpus);

/// Affected recordings are bucketed by their maximum concurrent degree and
/// weighted by duration.
DegreeHistogram mistrack_degree_breakdown(const Corpus& corpus);

std::string stats_to_json(const StatsReport& stats);
std::string stats_to_csv(const StatsReport& stats);
std::string histogram_to_json(const DegreeHistogram& hist);
std::string histogram_to_csv(const DegreeHistogram& hist);

/// Fixed two-decimal rendering used for hours in reports.
double round_to(double value, int decimals);

}  // namespace artrec
