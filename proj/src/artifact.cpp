#include "artrec/artifact.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <zlib.h>

#include "json.hpp"

namespace artrec {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'A', 'R', 'T', 'R', 'E', 'C', 'M', '1'};

template <class T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(std::string_view bytes, std::size_t& pos) {
    if (pos + sizeof(T) > bytes.size()) throw Error("artifact is truncated");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    }
    pos += sizeof(T);
    return value;
}

std::uint32_t crc_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), chunk);
        pos += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

json config_json(const ModelConfig& c) {
    return json{{"n_mask", c.n_mask},
                {"dilation_rates", c.dilation_rates},
                {"mixing_width", c.mixing_width},
                {"recurrent_layers", c.recurrent_layers},
                {"recurrent_width", c.recurrent_width},
                {"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"patience", c.patience},
                {"max_epochs", c.max_epochs},
                {"seed", c.seed},
                {"per_sample_masking", c.per_sample_masking}};
}

ModelConfig config_of(const json& j) {
    ModelConfig c;
    c.n_mask = j.at("n_mask").get<int>();
    c.dilation_rates = j.at("dilation_rates").get<std::vector<int>>();
    c.mixing_width = j.at("mixing_width").get<int>();
    c.recurrent_layers = j.at("recurrent_layers").get<int>();
    c.recurrent_width = j.at("recurrent_width").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.patience = j.at("patience").get<int>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.per_sample_masking = j.value("per_sample_masking", false);
    validate(c);
    return c;
}

json history_json(const TrainingHistory& h) {
    json epochs = json::array();
    for (const auto& e : h.epochs) epochs.push_back({{"train_loss", e.train_loss}, {"holdout_loss", e.holdout_loss}});
    return json{{"best_epoch", h.best_epoch},
                {"stopped_epoch", h.stopped_epoch},
                {"initial_holdout_loss", h.initial_holdout_loss},
                {"epochs", epochs}};
}

TrainingHistory history_of(const json& j) {
    TrainingHistory h;
    h.best_epoch = j.at("best_epoch").get<int>();
    h.stopped_epoch = j.at("stopped_epoch").get<int>();
    h.initial_holdout_loss = j.value("initial_holdout_loss", 0.0);
    for (const auto& e : j.at("epochs")) {
        h.epochs.push_back({e.at("train_loss").get<double>(), e.at("holdout_loss").get<double>()});
    }
    return h;
}

}  // namespace

std::string config_to_json(const ModelConfig& config) { return config_json(config).dump(2) + "\n"; }

ModelConfig config_from_json(std::string_view text) {
    try {
        return config_of(json::parse(text));
    } catch (const json::exception& e) {
        throw Error(std::string("model config: ") + e.what());
    }
}

std::string history_to_json(const TrainingHistory& history) { return history_json(history).dump(2) + "\n"; }

std::string save_artifact(const ModelArtifact& a) {
    json tensors = json::array();
    std::size_t offset = 0;
    visit_tensors(a.params, [&](const std::string& name, const Mat<float>& m) {
        tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
        offset += static_cast<std::size_t>(m.size());
    });
    json meta{{"format", "artrec-model"},
              {"version", kArtifactVersion},
              {"speaker", a.speaker_id},
              {"config", config_json(a.config)},
              {"normalizer",
               {{"mean", std::vector<double>(a.normalizer.mean.data(), a.normalizer.mean.data() + kNumChannels)},
                {"std", std::vector<double>(a.normalizer.std.data(), a.normalizer.std.data() + kNumChannels)}}},
              {"history", history_json(a.history)},
              {"selection",
               {{"selected", a.selection.selected},
                {"score", a.selection.score},
                {"candidates_n", a.selection.candidates_n},
                {"candidate_scores", a.selection.candidate_scores}}},
              {"tensors", tensors}};
    const std::string meta_text = meta.dump();

    std::string out(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(out, kArtifactVersion);
    put_le<std::uint64_t>(out, meta_text.size());
    out += meta_text;
    put_le<std::uint64_t>(out, offset);
    out.reserve(out.size() + offset * 4 + 4);
    visit_tensors(a.params, [&](const std::string&, const Mat<float>& m) {
        // Row-major element order within each tensor.
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(m(i, j)));
        }
    });
    put_le<std::uint32_t>(out, crc_of(out));
    return out;
}

ModelArtifact load_artifact(std::string_view bytes) {
    if (bytes.size() < sizeof(kMagic) + 4 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw Error("not a model artifact (bad magic)");
    }
    if (bytes.size() < sizeof(kMagic) + 4 + 8 + 8 + 4) throw Error("artifact is truncated");
    {
        std::size_t tail = bytes.size() - 4;
        const auto stored = get_le<std::uint32_t>(bytes, tail);
        if (stored != crc_of(bytes.substr(0, bytes.size() - 4))) throw Error("artifact checksum mismatch");
    }
    std::size_t pos = sizeof(kMagic);
    const auto version = get_le<std::uint32_t>(bytes, pos);
    if (version != kArtifactVersion) {
        throw Error("artifact version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kArtifactVersion) + ")");
    }
    const auto meta_len = get_le<std::uint64_t>(bytes, pos);
    if (pos + meta_len > bytes.size()) throw Error("artifact is truncated");
    json meta;
    try {
        meta = json::parse(bytes.substr(pos, meta_len));
    } catch (const json::exception& e) {
        throw Error(std::string("artifact metadata: ") + e.what());
    }
    pos += meta_len;
    const auto n_floats = get_le<std::uint64_t>(bytes, pos);
    if (pos + n_floats * 4 + 4 != bytes.size()) throw Error("artifact payload size mismatch");
    const std::size_t payload = pos;

    ModelArtifact a;
    try {
        a.speaker_id = meta.value("speaker", std::string());
        a.config = config_of(meta.at("config"));
        const auto mean = meta.at("normalizer").at("mean").get<std::vector<double>>();
        const auto sd = meta.at("normalizer").at("std").get<std::vector<double>>();
        if (mean.size() != kNumChannels || sd.size() != kNumChannels) throw Error("normalizer must have 16 channels");
        for (int c = 0; c < kNumChannels; ++c) {
            a.normalizer.mean(c) = mean[static_cast<std::size_t>(c)];
            a.normalizer.std(c) = sd[static_cast<std::size_t>(c)];
        }
        a.history = history_of(meta.at("history"));
        const auto& sel = meta.at("selection");
        a.selection.selected = sel.at("selected").get<bool>();
        a.selection.score = sel.at("score").get<double>();
        a.selection.candidates_n = sel.at("candidates_n").get<std::vector<int>>();
        a.selection.candidate_scores = sel.at("candidate_scores").get<std::vector<double>>();

        std::map<std::string, json> index;
        for (const auto& t : meta.at("tensors")) index[t.at("name").get<std::string>()] = t;
        a.params = init_params<float>(a.config, 0);
        visit_tensors(a.params, [&](const std::string& name, Mat<float>& m) {
            const auto it = index.find(name);
            if (it == index.end()) throw Error("artifact is missing tensor " + name);
            const auto rows = it->second.at("rows").get<Eigen::Index>();
            const auto cols = it->second.at("cols").get<Eigen::Index>();
            const auto off = it->second.at("offset").get<std::uint64_t>();
            if (rows != m.rows() || cols != m.cols()) throw Error("tensor " + name + " has unexpected shape");
            if (off + static_cast<std::uint64_t>(rows * cols) > n_floats) throw Error("tensor " + name + " overruns payload");
            std::size_t p = payload + off * 4;
            for (Eigen::Index i = 0; i < rows; ++i) {
                for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = std::bit_cast<float>(get_le<std::uint32_t>(bytes, p));
            }
        });
    } catch (const json::exception& e) {
        throw Error(std::string("artifact metadata: ") + e.what());
    }
    return a;
}

void save_artifact_file(const std::filesystem::path& path, const ModelArtifact& artifact) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write artifact " + path.string());
    const auto bytes = save_artifact(artifact);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing artifact " + path.string());
}

ModelArtifact load_artifact_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open artifact " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_artifact(ss.str());
}

}  // namespace artrec
