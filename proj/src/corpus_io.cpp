#include "artrec/corpus_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace artrec {

using nlohmann::json;

std::string_view task_kind_name(TaskKind kind) {
    return kind == TaskKind::Verbal ? "verbal" : "nonverbal";
}

const CorpusEntry* Corpus::entry_for(const std::string& speaker, const std::string& task) const {
    for (const auto& e : entries) {
        if (e.speaker == speaker && e.task == task) return &e;
    }
    return nullptr;
}

std::vector<std::string> Corpus::speakers() const {
    std::set<std::string> ids;
    for (const auto& r : recordings) ids.insert(r.speaker_id());
    return {ids.begin(), ids.end()};
}

Corpus make_corpus(std::vector<Recording> recordings, std::vector<CorpusEntry> entries) {
    std::sort(recordings.begin(), recordings.end(), [](const Recording& a, const Recording& b) {
        return std::tie(a.speaker_id(), a.task_id()) < std::tie(b.speaker_id(), b.task_id());
    });
    for (std::size_t i = 1; i < recordings.size(); ++i) {
        if (recordings[i].speaker_id() == recordings[i - 1].speaker_id() &&
            recordings[i].task_id() == recordings[i - 1].task_id()) {
            throw Error("duplicate recording " + recordings[i].speaker_id() + "/" + recordings[i].task_id());
        }
    }
    return Corpus{std::move(recordings), std::move(entries)};
}

// ============================================================================
// Trajectory files
// ============================================================================

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find('\t', pos);
        out.push_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

std::optional<double> parse_number(std::string_view tok) {
    if (tok == "nan" || tok == "NaN" || tok == "-nan") return std::numeric_limits<double>::quiet_NaN();
    if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) return std::nullopt;
    return v;
}

void append_number(std::string& out, double v) {
    if (std::isnan(v)) {
        out += "nan";
        return;
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

}  // namespace

Recording parse_trajectory_file(std::string_view text, const TrajectoryFileDefaults& defaults) {
    std::string speaker = defaults.speaker_id;
    std::string task = defaults.task_id;
    std::optional<double> declared_rate;

    std::vector<int> column_channel;  // -1 for the time column
    bool have_header = false;
    std::vector<std::array<double, kNumChannels>> rows;
    std::vector<double> times;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '#') {
            if (have_header) throw ParseError(line_no, "comment line after header");
            auto body = trim(line.substr(1));
            const auto colon = body.find(':');
            if (colon == std::string_view::npos) continue;
            const auto key = trim(body.substr(0, colon));
            const auto value = trim(body.substr(colon + 1));
            if (key == "speaker") {
                speaker = std::string(value);
            } else if (key == "task") {
                task = std::string(value);
            } else if (key == "sample_rate") {
                const auto v = parse_number(value);
                if (!v || !(*v > 0.0) || !std::isfinite(*v)) throw ParseError(line_no, "invalid sample_rate");
                declared_rate = *v;
            }
            continue;
        }

        const auto fields = split_tabs(line);
        if (!have_header) {
            std::array<bool, kNumChannels> seen{};
            bool seen_time = false;
            for (const auto& name : fields) {
                if (name == "time") {
                    if (seen_time) throw ParseError(line_no, "duplicate column 'time'");
                    seen_time = true;
                    column_channel.push_back(-1);
                    continue;
                }
                int found = -1;
                for (int c = 0; c < kNumChannels; ++c) {
                    if (channel_name(c) == name) found = c;
                }
                if (found < 0) throw ParseError(line_no, "unknown column '" + std::string(name) + "'");
                if (seen[static_cast<std::size_t>(found)]) {
                    throw ParseError(line_no, "duplicate column '" + std::string(name) + "'");
                }
                seen[static_cast<std::size_t>(found)] = true;
                column_channel.push_back(found);
            }
            if (!seen_time) throw ParseError(line_no, "missing column 'time'");
            for (int c = 0; c < kNumChannels; ++c) {
                if (!seen[static_cast<std::size_t>(c)]) {
                    throw ParseError(line_no, "missing column '" + channel_name(c) + "'");
                }
            }
            have_header = true;
            continue;
        }

        if (fields.size() != column_channel.size()) {
            throw ParseError(line_no, "expected " + std::to_string(column_channel.size()) + " fields, found " +
                                          std::to_string(fields.size()));
        }
        std::array<double, kNumChannels> row{};
        for (std::size_t i = 0; i < fields.size(); ++i) {
            const auto v = parse_number(fields[i]);
            if (!v) throw ParseError(line_no, "malformed number '" + std::string(fields[i]) + "'");
            if (column_channel[i] < 0) {
                times.push_back(*v);
            } else {
                row[static_cast<std::size_t>(column_channel[i])] = *v;
            }
        }
        rows.push_back(row);
    }

    if (!have_header) throw ParseError(line_no, "missing header row");
    if (rows.empty()) throw ParseError(line_no, "no samples");

    double rate = defaults.sample_rate;
    if (declared_rate) {
        rate = *declared_rate;
    } else if (times.size() >= 2 && times[1] > times[0]) {
        rate = 1.0 / (times[1] - times[0]);
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    ChannelMatrix samples(n, kNumChannels);
    FlagMatrix flags = FlagMatrix::Constant(n, kNumPellets, false);
    for (Eigen::Index t = 0; t < n; ++t) {
        const auto& row = rows[static_cast<std::size_t>(t)];
        for (int c = 0; c < kNumChannels; ++c) {
            const double v = row[static_cast<std::size_t>(c)];
            samples(t, c) = v;
            if (!std::isfinite(v) || std::abs(v) >= kMistrackSentinel) flags(t, c / 2) = true;
        }
        for (int p = 0; p < kNumPellets; ++p) {
            if (flags(t, p)) {
                samples(t, 2 * p) = std::numeric_limits<double>::quiet_NaN();
                samples(t, 2 * p + 1) = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    if (speaker.empty() || task.empty()) throw ParseError(1, "speaker and task ids are required");
    return Recording(std::move(speaker), std::move(task), rate, std::move(samples), std::move(flags));
}

std::string write_trajectory_file(const Recording& rec) {
    std::string out;
    out.reserve(rec.length() * kNumChannels * 12 + 256);
    out += "# speaker: " + rec.speaker_id() + "\n";
    out += "# task: " + rec.task_id() + "\n";
    out += "# sample_rate: ";
    append_number(out, rec.sample_rate());
    out += "\ntime";
    for (int c = 0; c < kNumChannels; ++c) {
        out += '\t';
        out += channel_name(c);
    }
    out += '\n';
    const auto& s = rec.samples();
    const auto& f = rec.mistrack();
    for (Eigen::Index t = 0; t < s.rows(); ++t) {
        append_number(out, static_cast<double>(t) / rec.sample_rate());
        for (int c = 0; c < kNumChannels; ++c) {
            out += '\t';
            if (f(t, c / 2)) {
                out += "nan";
            } else {
                append_number(out, s(t, c));
            }
        }
        out += '\n';
    }
    return out;
}

Recording read_trajectory(const std::filesystem::path& path, const TrajectoryFileDefaults& defaults) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open trajectory file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_trajectory_file(ss.str(), defaults);
    } catch (const ParseError& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_trajectory(const std::filesystem::path& path, const Recording& rec) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write trajectory file " + path.string());
    out << write_trajectory_file(rec);
    if (!out) throw Error("failed writing " + path.string());
}

bool same_recording(const Recording& a, const Recording& b) {
    if (a.speaker_id() != b.speaker_id() || a.task_id() != b.task_id()) return false;
    if (a.sample_rate() != b.sample_rate() || a.length() != b.length()) return false;
    if ((a.mistrack() != b.mistrack()).any()) return false;
    for (Eigen::Index t = 0; t < a.samples().rows(); ++t) {
        for (int c = 0; c < kNumChannels; ++c) {
            if (a.mistrack()(t, c / 2)) continue;
            const double x = a.samples()(t, c);
            const double y = b.samples()(t, c);
            if (std::memcmp(&x, &y, sizeof(double)) != 0) return false;
        }
    }
    return true;
}

// ============================================================================
// Manifests
// ============================================================================

std::vector<CorpusEntry> parse_manifest(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw Error("manifest must be a JSON array");
    std::vector<CorpusEntry> entries;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& item = doc[i];
        const auto where = "manifest entry " + std::to_string(i);
        try {
            CorpusEntry e;
            e.path = item.at("path").get<std::string>();
            e.speaker = item.at("speaker").get<std::string>();
            e.task = item.at("task").get<std::string>();
            const auto kind = item.value("kind", std::string("verbal"));
            if (kind == "verbal") {
                e.kind = TaskKind::Verbal;
            } else if (kind == "nonverbal") {
                e.kind = TaskKind::Nonverbal;
            } else {
                throw Error(where + ": unknown kind '" + kind + "'");
            }
            if (item.contains("keep_intervals")) {
                for (const auto& iv : item.at("keep_intervals")) {
                    if (!iv.is_array() || iv.size() != 2) throw Error(where + ": keep interval must be [start, end]");
                    e.keep_intervals.emplace_back(iv[0].get<double>(), iv[1].get<double>());
                }
            }
            if (e.speaker.empty() || e.task.empty()) throw Error(where + ": speaker and task are required");
            entries.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw Error(where + ": " + ex.what());
        }
    }
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& e : entries) {
        if (!seen.emplace(e.speaker, e.task).second) {
            throw Error("duplicate manifest entry " + e.speaker + "/" + e.task);
        }
    }
    return entries;
}

Corpus load_manifest(std::string_view json_text, const std::filesystem::path& base_dir,
                     const ManifestOptions& options) {
    auto entries = parse_manifest(json_text);
    std::vector<Recording> recs;
    for (const auto& e : entries) {
        if (options.verbal_only && e.kind == TaskKind::Nonverbal) continue;
        std::filesystem::path p(e.path);
        if (p.is_relative()) p = base_dir / p;
        if (!std::filesystem::exists(p)) throw Error("manifest references missing file " + p.string());
        auto rec = read_trajectory(p, TrajectoryFileDefaults{e.speaker, e.task, kCanonicalRate});
        if (rec.speaker_id() != e.speaker || rec.task_id() != e.task) {
            // The manifest is authoritative for ids.
            rec = Recording(e.speaker, e.task, rec.sample_rate(), rec.samples(), rec.mistrack());
        }
        recs.push_back(std::move(rec));
    }
    return make_corpus(std::move(recs), std::move(entries));
}

Corpus load_manifest_file(const std::filesystem::path& path, const ManifestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open manifest " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_manifest(ss.str(), path.parent_path(), options);
}

std::string write_manifest(const std::vector<CorpusEntry>& entries) {
    json doc = json::array();
    for (const auto& e : entries) {
        json item{{"path", e.path}, {"speaker", e.speaker}, {"task", e.task},
                  {"kind", std::string(task_kind_name(e.kind))}};
        if (!e.keep_intervals.empty()) {
            json ivs = json::array();
            for (const auto& [a, b] : e.keep_intervals) ivs.push_back({a, b});
            item["keep_intervals"] = ivs;
        }
        doc.push_back(std::move(item));
    }
    return doc.dump(2) + "\n";
}

// ============================================================================
// Statistics
// ============================================================================

double round_to(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(value * scale) / scale;
}

StatsReport corpus_stats(const Corpus& corpus) {
    if (corpus.recordings.empty()) throw Error("corpus_stats: empty corpus");
    StatsReport r;
    std::size_t affected = 0;
    double total_s = 0.0;
    double clean_s = 0.0;
    for (const auto& rec : corpus.recordings) {
        const double d = recording_duration(rec);
        total_s += d;
        if (rec.has_mistracking()) {
            ++affected;
        } else {
            clean_s += d;
        }
    }
    r.recordings = corpus.recordings.size();
    r.total_hours = total_s / 3600.0;
    r.clean_hours = clean_s / 3600.0;
    r.pct_with_mistracking = 100.0 * static_cast<double>(affected) / static_cast<double>(r.recordings);
    return r;
}

DegreeHistogram mistrack_degree_breakdown(const Corpus& corpus) {
    std::array<double, 4> bucket_s{};
    double affected_s = 0.0;
    DegreeHistogram h;
    for (const auto& rec : corpus.recordings) {
        if (!rec.has_mistracking()) continue;
        const auto series = mistrack_degree_series(rec);
        const int max_degree = *std::max_element(series.begin(), series.end());
        const double d = recording_duration(rec);
        bucket_s[static_cast<std::size_t>(std::min(max_degree, 4) - 1)] += d;
        affected_s += d;
        ++h.affected_recordings;
    }
    if (h.affected_recordings == 0) throw Error("mistrack_degree_breakdown: no recording has mistracking");
    h.one = 100.0 * bucket_s[0] / affected_s;
    h.two = 100.0 * bucket_s[1] / affected_s;
    h.three = 100.0 * bucket_s[2] / affected_s;
    h.more_than_three = 100.0 * bucket_s[3] / affected_s;
    return h;
}

std::string stats_to_json(const StatsReport& s) {
    json doc{{"recordings", s.recordings},
             {"total_hours", round_to(s.total_hours, 2)},
             {"clean_hours", round_to(s.clean_hours, 2)},
             {"pct_with_mistracking", round_to(s.pct_with_mistracking, 2)}};
    return doc.dump(2) + "\n";
}

std::string stats_to_csv(const StatsReport& s) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << "recordings,total_hours,clean_hours,pct_with_mistracking\n"
        << s.recordings << ',' << s.total_hours << ',' << s.clean_hours << ',' << s.pct_with_mistracking << '\n';
    return out.str();
}

std::string histogram_to_json(const DegreeHistogram& h) {
    json doc{{"affected_recordings", h.affected_recordings},
             {"one", round_to(h.one, 2)},
             {"two", round_to(h.two, 2)},
             {"three", round_to(h.three, 2)},
             {"more_than_three", round_to(h.more_than_three, 2)}};
    return doc.dump(2) + "\n";
}

std::string histogram_to_csv(const DegreeHistogram& h) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << "degree,percent\n"
        << "one," << h.one << "\ntwo," << h.two << "\nthree," << h.three << "\nmore_than_three,"
        << h.more_than_three << '\n';
    return out.str();
}

}  // namespace artrec
