#pragma once

// Dataset model, the on-disk dataset directory format, seeded batching and the
// synthetic generator.
//
// Directory layout:
//   meta.json       {"format_version":1,"audio_dim":768,"visual_dim":768,"text_dim":512}
//   manifest.jsonl  one record per line:
//                   {"clip_id","kind","caption_type","caption_index","rows","cols",
//                    "blob","offset","byte_len"}  (caption_* only for kind "caption")
//   *.f32           little-endian float32, row-major, no header

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "trimodal/error.hpp"
#include "trimodal/matrix.hpp"
#include "trimodal/model.hpp"
#include "trimodal/regime.hpp"
#include "trimodal/rng.hpp"

namespace trimodal {

inline constexpr int dataset_format_version = 1;

struct DatasetDims {
    std::size_t audio_dim = 768;
    std::size_t visual_dim = 768;
    std::size_t text_dim = 512;

    friend bool operator==(const DatasetDims&, const DatasetDims&) = default;
};

/// Raw encoder output for one clip and one of the time-varying modalities.
struct EmbeddingRecord {
    std::string clip_id;
    Modality modality = Modality::audio;
    Matrix features;
};

struct CaptionRecord {
    std::string clip_id;
    CaptionType caption_type = CaptionType::audio;
    Vector text_embedding;
    std::size_t caption_index = 0;
};

struct Clip {
    std::string id;
    Matrix audio;
    Matrix visual;
    std::array<std::vector<Vector>, 3> captions; // indexed by CaptionType

    const std::vector<Vector>& captions_of(CaptionType t) const noexcept {
        return captions[static_cast<std::size_t>(t)];
    }
    std::vector<Vector>& captions_of(CaptionType t) noexcept { return captions[static_cast<std::size_t>(t)]; }

    friend bool operator==(const Clip&, const Clip&) = default;
};

struct Dataset {
    DatasetDims dims;
    std::vector<Clip> clips;

    friend bool operator==(const Dataset&, const Dataset&) = default;

    bool has_caption_type(CaptionType t) const {
        return std::any_of(clips.begin(), clips.end(),
                           [t](const Clip& c) { return !c.captions_of(t).empty(); });
    }

    std::size_t caption_count(CaptionType t) const {
        std::size_t n = 0;
        for (const auto& c : clips) {
            n += c.captions_of(t).size();
        }
        return n;
    }

    std::vector<EmbeddingRecord> embedding_records() const {
        std::vector<EmbeddingRecord> out;
        for (const auto& c : clips) {
            out.push_back({c.id, Modality::audio, c.audio});
            out.push_back({c.id, Modality::visual, c.visual});
        }
        return out;
    }

    std::vector<CaptionRecord> caption_records() const {
        std::vector<CaptionRecord> out;
        for (const auto& c : clips) {
            for (CaptionType t : all_caption_types) {
                const auto& caps = c.captions_of(t);
                for (std::size_t i = 0; i < caps.size(); ++i) {
                    out.push_back({c.id, t, caps[i], i});
                }
            }
        }
        return out;
    }

    /// FNV-1a over ids, dims and the float32 bit patterns of every value.
    std::uint64_t fingerprint() const {
        Fnv1a h;
        auto put_u64 = [&h](std::uint64_t v) {
            for (int i = 0; i < 8; ++i) {
                const auto byte = static_cast<unsigned char>(v >> (8 * i));
                h.update(&byte, 1);
            }
        };
        auto put_values = [&](std::span<const double> values) {
            put_u64(values.size());
            for (double v : values) {
                put_u64(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
            }
        };
        put_u64(dims.audio_dim);
        put_u64(dims.visual_dim);
        put_u64(dims.text_dim);
        for (const auto& c : clips) {
            put_u64(c.id.size());
            h.update(c.id.data(), c.id.size());
            put_values(c.audio.data());
            put_values(c.visual.data());
            for (const auto& caps : c.captions) {
                put_u64(caps.size());
                for (const auto& v : caps) {
                    put_values(v);
                }
            }
        }
        return h.digest();
    }
};

namespace detail {

inline void check_finite(std::span<const double> values, const std::string& what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw format_error(what + " contains a non-finite value");
        }
    }
}

} // namespace detail

/// Builds a dataset from flat records, checking the record invariants. Clip
/// order follows the first appearance of each clip id in `records`.
inline Dataset assemble_dataset(const DatasetDims& dims, const std::vector<EmbeddingRecord>& records,
                                const std::vector<CaptionRecord>& captions) {
    Dataset ds;
    ds.dims = dims;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::array<bool, 2>> seen;
    for (const auto& rec : records) {
        if (rec.modality == Modality::text) {
            throw format_error("clip " + rec.clip_id + ": text features belong in caption records");
        }
        const std::size_t want = rec.modality == Modality::audio ? dims.audio_dim : dims.visual_dim;
        if (rec.features.rows() == 0) {
            throw format_error("clip " + rec.clip_id + ": " + std::string(to_string(rec.modality)) +
                               " features have no rows");
        }
        if (rec.features.cols() != want) {
            throw format_error("clip " + rec.clip_id + ": " + std::string(to_string(rec.modality)) +
                               " features are " + rec.features.shape() + ", expected " +
                               std::to_string(want) + " columns");
        }
        detail::check_finite(rec.features.data(), "clip " + rec.clip_id);
        auto [it, inserted] = index.emplace(rec.clip_id, ds.clips.size());
        if (inserted) {
            ds.clips.push_back(Clip{rec.clip_id, {}, {}, {}});
            seen.push_back({false, false});
        }
        const std::size_t slot = rec.modality == Modality::audio ? 0 : 1;
        if (seen[it->second][slot]) {
            throw format_error("clip " + rec.clip_id + ": duplicate " +
                               std::string(to_string(rec.modality)) + " record");
        }
        seen[it->second][slot] = true;
        (slot == 0 ? ds.clips[it->second].audio : ds.clips[it->second].visual) = rec.features;
    }
    for (std::size_t i = 0; i < ds.clips.size(); ++i) {
        if (!seen[i][0] || !seen[i][1]) {
            throw format_error("clip " + ds.clips[i].id + " is missing its " +
                               (seen[i][0] ? "visual" : "audio") + " record");
        }
    }

    // Captions are placed by caption_index; indices of one clip and type must
    // form the range 0..n-1.
    std::vector<std::array<std::map<std::size_t, Vector>, 3>> staged(ds.clips.size());
    for (const auto& cap : captions) {
        auto it = index.find(cap.clip_id);
        if (it == index.end()) {
            throw format_error("caption references unknown clip_id " + cap.clip_id);
        }
        if (cap.text_embedding.size() != dims.text_dim) {
            throw format_error("clip " + cap.clip_id + ": caption embedding has " +
                               std::to_string(cap.text_embedding.size()) + " values, expected " +
                               std::to_string(dims.text_dim));
        }
        detail::check_finite(cap.text_embedding, "caption of clip " + cap.clip_id);
        auto& slot = staged[it->second][static_cast<std::size_t>(cap.caption_type)];
        if (!slot.emplace(cap.caption_index, cap.text_embedding).second) {
            throw format_error("clip " + cap.clip_id + ": duplicate " +
                               std::string(to_string(cap.caption_type)) + " caption index " +
                               std::to_string(cap.caption_index));
        }
    }
    for (std::size_t i = 0; i < ds.clips.size(); ++i) {
        for (CaptionType t : all_caption_types) {
            auto& slot = staged[i][static_cast<std::size_t>(t)];
            std::size_t expected = 0;
            for (auto& [idx, vec] : slot) {
                if (idx != expected++) {
                    throw format_error("clip " + ds.clips[i].id + ": " + std::string(to_string(t)) +
                                       " caption indices are not contiguous from 0");
                }
                ds.clips[i].captions_of(t).push_back(std::move(vec));
            }
        }
    }
    return ds;
}

namespace detail {

inline void append_f32(std::string& blob, std::span<const double> values) {
    const std::size_t start = blob.size();
    blob.resize(start + values.size() * 4);
    char* out = blob.data() + start;
    for (double v : values) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int b = 0; b < 4; ++b) {
            *out++ = static_cast<char>((bits >> (8 * b)) & 0xFFu);
        }
    }
}

inline std::vector<double> decode_f32(std::string_view bytes) {
    std::vector<double> out(bytes.size() / 4);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(p[4 * i + b]) << (8 * b);
        }
        out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw format_error(path.string() + ": cannot open");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw error(path.string() + ": cannot open for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw error(path.string() + ": write failed");
    }
}

inline std::string meta_json(const DatasetDims& dims) {
    nlohmann::ordered_json meta;
    meta["format_version"] = dataset_format_version;
    meta["audio_dim"] = dims.audio_dim;
    meta["visual_dim"] = dims.visual_dim;
    meta["text_dim"] = dims.text_dim;
    return meta.dump() + "\n";
}

} // namespace detail

/// Writes the dataset directory (created if needed). Output bytes are a pure
/// function of the dataset.
inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::string audio_blob;
    std::string visual_blob;
    std::string text_blob;
    std::string manifest;

    auto add_line = [&manifest](const std::string& clip_id, std::string_view kind,
                                std::optional<std::pair<CaptionType, std::size_t>> caption,
                                const Matrix& m, std::string_view blob, std::size_t offset) {
        nlohmann::ordered_json line;
        line["clip_id"] = clip_id;
        line["kind"] = kind;
        if (caption) {
            line["caption_type"] = to_string(caption->first);
            line["caption_index"] = caption->second;
        }
        line["rows"] = m.rows();
        line["cols"] = m.cols();
        line["blob"] = blob;
        line["offset"] = offset;
        line["byte_len"] = m.size() * 4;
        manifest += line.dump();
        manifest += '\n';
    };

    for (const auto& clip : ds.clips) {
        add_line(clip.id, "audio", std::nullopt, clip.audio, "audio.f32", audio_blob.size());
        detail::append_f32(audio_blob, clip.audio.data());
        add_line(clip.id, "visual", std::nullopt, clip.visual, "visual.f32", visual_blob.size());
        detail::append_f32(visual_blob, clip.visual.data());
        for (CaptionType t : all_caption_types) {
            const auto& caps = clip.captions_of(t);
            for (std::size_t i = 0; i < caps.size(); ++i) {
                const Matrix row = Matrix::from_row(caps[i]);
                add_line(clip.id, "caption", std::pair{t, i}, row, "text.f32", text_blob.size());
                detail::append_f32(text_blob, row.data());
            }
        }
    }

    detail::write_file(dir / "meta.json", detail::meta_json(ds.dims));
    detail::write_file(dir / "audio.f32", audio_blob);
    detail::write_file(dir / "visual.f32", visual_blob);
    detail::write_file(dir / "text.f32", text_blob);
    detail::write_file(dir / "manifest.jsonl", manifest);
}

/// Loads and validates a dataset directory. Errors name the file and the
/// manifest line or byte range at fault.
inline Dataset read_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path meta_path = dir / "meta.json";
    const fs::path manifest_path = dir / "manifest.jsonl";

    DatasetDims dims;
    {
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(detail::read_file(meta_path));
        } catch (const nlohmann::json::exception& e) {
            throw format_error(meta_path.string() + ": " + e.what());
        }
        if (!meta.is_object() || !meta.contains("format_version") || !meta["format_version"].is_number_integer()) {
            throw format_error(meta_path.string() + ": missing format_version");
        }
        const int version = meta["format_version"].get<int>();
        if (version != dataset_format_version) {
            throw format_error(meta_path.string() + ": format_version " + std::to_string(version) +
                               " is not supported (expected " + std::to_string(dataset_format_version) + ")");
        }
        for (const char* key : {"audio_dim", "visual_dim", "text_dim"}) {
            if (!meta.contains(key) || !meta[key].is_number_unsigned() || meta[key].get<std::size_t>() == 0) {
                throw format_error(meta_path.string() + ": missing or invalid " + key);
            }
        }
        dims.audio_dim = meta["audio_dim"].get<std::size_t>();
        dims.visual_dim = meta["visual_dim"].get<std::size_t>();
        dims.text_dim = meta["text_dim"].get<std::size_t>();
    }

    std::unordered_map<std::string, std::string> blobs;
    auto blob_bytes = [&](const std::string& name, const std::string& where) -> const std::string& {
        auto it = blobs.find(name);
        if (it != blobs.end()) {
            return it->second;
        }
        const fs::path rel(name);
        if (name.empty() || rel.is_absolute() ||
            std::any_of(rel.begin(), rel.end(), [](const fs::path& part) { return part == ".."; })) {
            throw format_error(where + ": blob path '" + name + "' must be relative to the dataset directory");
        }
        return blobs.emplace(name, detail::read_file(dir / rel)).first->second;
    };

    std::vector<EmbeddingRecord> records;
    std::vector<CaptionRecord> captions;
    std::istringstream manifest(detail::read_file(manifest_path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::string where = manifest_path.string() + ":" + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw format_error(where + ": " + e.what());
        }
        auto get_str = [&](const char* key) {
            if (!j.contains(key) || !j[key].is_string()) {
                throw format_error(where + ": missing string field '" + key + "'");
            }
            return j[key].get<std::string>();
        };
        auto get_count = [&](const char* key) {
            if (!j.contains(key) || !j[key].is_number_unsigned()) {
                throw format_error(where + ": missing non-negative integer field '" + key + "'");
            }
            return j[key].get<std::size_t>();
        };
        const std::string clip_id = get_str("clip_id");
        const std::string kind = get_str("kind");
        const std::size_t rows = get_count("rows");
        const std::size_t cols = get_count("cols");
        const std::string blob = get_str("blob");
        const std::size_t offset = get_count("offset");
        const std::size_t byte_len = get_count("byte_len");

        std::size_t expected_cols = 0;
        if (kind == "audio") {
            expected_cols = dims.audio_dim;
        } else if (kind == "visual") {
            expected_cols = dims.visual_dim;
        } else if (kind == "caption") {
            expected_cols = dims.text_dim;
        } else {
            throw format_error(where + ": unknown kind '" + kind + "'");
        }
        if (cols != expected_cols) {
            throw format_error(where + ": " + kind + " record has " + std::to_string(cols) +
                               " columns but meta.json declares " + std::to_string(expected_cols));
        }
        if (byte_len != rows * cols * 4) {
            throw format_error(where + ": byte_len " + std::to_string(byte_len) + " != rows*cols*4 = " +
                               std::to_string(rows * cols * 4));
        }
        const std::string& bytes = blob_bytes(blob, where);
        if (offset > bytes.size() || byte_len > bytes.size() - offset) {
            throw format_error((dir / blob).string() + ": record at " + where + " expects bytes [" +
                               std::to_string(offset) + ", " + std::to_string(offset + byte_len) +
                               ") but the blob is " + std::to_string(bytes.size()) + " bytes long");
        }
        Matrix values(rows, cols, detail::decode_f32(std::string_view(bytes).substr(offset, byte_len)));
        if (!values.all_finite()) {
            throw format_error(where + ": record contains non-finite values");
        }

        if (kind == "caption") {
            const auto type = parse_caption_type(get_str("caption_type"));
            if (!type) {
                throw format_error(where + ": unknown caption_type '" + j["caption_type"].get<std::string>() + "'");
            }
            if (rows != 1) {
                throw format_error(where + ": caption records must have exactly one row");
            }
            captions.push_back({clip_id, *type, values.values(), get_count("caption_index")});
        } else {
            if (rows == 0) {
                throw format_error(where + ": " + kind + " record has no rows");
            }
            records.push_back({clip_id, kind == "audio" ? Modality::audio : Modality::visual, std::move(values)});
        }
    }

    try {
        return assemble_dataset(dims, records, captions);
    } catch (const format_error& e) {
        throw format_error(manifest_path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Batching

/// Which clips (and which of their captions) make up one minibatch.
struct BatchPlan {
    std::size_t epoch = 0;
    std::size_t index = 0;
    CaptionType caption_type = CaptionType::audio_visual;
    std::vector<std::size_t> clips;           // indices into Dataset::clips
    std::vector<std::size_t> caption_choice;  // per clip, index into captions_of(caption_type)
};

namespace detail {
enum : std::uint64_t { shuffle_stream = 1, coin_stream = 2, caption_stream = 3 };
}

/// Throws data_mismatch_error listing every clip that lacks a caption type the
/// phase can draw.
inline void check_phase_data(const Dataset& ds, const Phase& phase) {
    for (CaptionType t : caption_types_for(phase)) {
        std::vector<std::string> missing;
        for (const auto& c : ds.clips) {
            if (c.captions_of(t).empty()) {
                missing.push_back(c.id);
            }
        }
        if (!missing.empty()) {
            std::string msg = "regime " + std::string(to_string(phase.regime)) + " needs " +
                              std::string(to_string(t)) + " captions; missing for " +
                              std::to_string(missing.size()) + " clip(s):";
            for (std::size_t i = 0; i < missing.size() && i < 20; ++i) {
                msg += " " + missing[i];
            }
            if (missing.size() > 20) {
                msg += " ...";
            }
            throw data_mismatch_error(msg);
        }
    }
}

/// Seeded batching for one epoch. The clip order, the per-batch caption-type
/// coin (mixed regime) and the per-clip caption choice come from separate
/// streams keyed by (epoch), (epoch, batch index) and (epoch, clip, type). A
/// trailing batch of a single clip is dropped.
inline std::vector<BatchPlan> make_batches(const Dataset& ds, std::size_t batch_size, const Phase& phase,
                                           std::uint64_t seed, std::size_t epoch) {
    if (ds.clips.empty()) {
        throw empty_input_error("make_batches: dataset has no clips");
    }
    if (batch_size < 2) {
        throw parameter_error("batch size must be at least 2, got " + std::to_string(batch_size));
    }
    check_phase_data(ds, phase);
    const auto types = caption_types_for(phase);

    std::vector<std::size_t> order(ds.clips.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    Rng shuffle_rng(stream_key(seed, {detail::shuffle_stream, epoch}));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    std::vector<BatchPlan> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        if (end - start < 2) {
            break;
        }
        BatchPlan plan;
        plan.epoch = epoch;
        plan.index = batches.size();
        if (types.size() == 1) {
            plan.caption_type = types.front();
        } else {
            Rng coin(stream_key(seed, {detail::coin_stream, epoch, plan.index}));
            plan.caption_type = coin.coin() ? CaptionType::audio : CaptionType::visual;
        }
        for (std::size_t k = start; k < end; ++k) {
            const std::size_t clip = order[k];
            const std::size_t available = ds.clips[clip].captions_of(plan.caption_type).size();
            std::size_t choice = 0;
            if (available > 1) {
                Rng pick(stream_key(seed, {detail::caption_stream, epoch, clip,
                                           static_cast<std::uint64_t>(plan.caption_type)}));
                choice = static_cast<std::size_t>(pick.below(available));
            }
            plan.clips.push_back(clip);
            plan.caption_choice.push_back(choice);
        }
        batches.push_back(std::move(plan));
    }
    return batches;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticConfig {
    std::size_t n_clips = 512;
    std::size_t shared_dim = 8;      // latent block present in every modality
    std::size_t audio_only_dim = 4;  // latent block seen only by audio and audio text
    std::size_t visual_only_dim = 4; // latent block seen only by visual and visual text
    double noise_sigma = 0.1;
    double signal_scale = 0.03;      // per-entry std of the clean audio/visual signal
    std::size_t rows_per_clip = 4;
    std::size_t captions_per_type = 2;
    std::uint64_t seed = 0;   // mixing maps and latents
    std::uint64_t split = 0;  // distinct splits share mixing maps but not clips
    DatasetDims dims;
};

namespace detail {

inline Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
    Matrix m(rows, cols);
    for (double& v : m.data()) {
        v = stddev * rng.normal();
    }
    return m;
}

/// out += map * latent for a map stored out_dim x latent_dim.
inline void accumulate_mapped(std::span<double> out, const Matrix& map, std::span<const double> latent) {
    for (std::size_t r = 0; r < map.rows(); ++r) {
        out[r] += dot(map.row(r), latent);
    }
}

inline double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

} // namespace detail

/// Linear-Gaussian trimodal data. Each clip has a latent z = [z_s, z_a, z_v].
/// Audio rows see [z_s, z_a], visual rows see [z_s, z_v]. Text embeddings use
/// one map for z_s shared across caption types plus type-specific maps for z_a
/// and z_v: audio captions carry [z_s, z_a], visual captions [z_s, z_v],
/// audio-visual captions all three. Audio and visual mixing maps are scaled so
/// each clean entry has standard deviation signal_scale (text maps use unit
/// scale), then i.i.d. noise_sigma noise is added. Values are stored at float32
/// precision.
inline Dataset gen_synthetic(const SyntheticConfig& cfg) {
    if (cfg.n_clips == 0 || cfg.shared_dim == 0 || cfg.audio_only_dim == 0 || cfg.visual_only_dim == 0 ||
        cfg.rows_per_clip == 0 || cfg.captions_per_type == 0) {
        throw parameter_error("gen_synthetic: all counts must be at least 1");
    }
    if (!(cfg.noise_sigma >= 0.0) || !std::isfinite(cfg.noise_sigma)) {
        throw parameter_error("gen_synthetic: noise_sigma must be a finite value >= 0");
    }
    if (!(cfg.signal_scale > 0.0) || !std::isfinite(cfg.signal_scale)) {
        throw parameter_error("gen_synthetic: signal_scale must be a finite value > 0");
    }
    const std::size_t ks = cfg.shared_dim;
    const std::size_t ka = cfg.audio_only_dim;
    const std::size_t kv = cfg.visual_only_dim;

    Rng map_rng(stream_key(cfg.seed, {0x5EED, 0}));
    const double audio_scale = cfg.signal_scale / std::sqrt(static_cast<double>(ks + ka));
    const double visual_scale = cfg.signal_scale / std::sqrt(static_cast<double>(ks + kv));
    const double text_scale = 1.0 / std::sqrt(static_cast<double>(ks + ka + kv));
    const Matrix audio_map = detail::gaussian_matrix(map_rng, cfg.dims.audio_dim, ks + ka, audio_scale);
    const Matrix visual_map = detail::gaussian_matrix(map_rng, cfg.dims.visual_dim, ks + kv, visual_scale);
    const Matrix text_shared = detail::gaussian_matrix(map_rng, cfg.dims.text_dim, ks, text_scale);
    const Matrix text_audio = detail::gaussian_matrix(map_rng, cfg.dims.text_dim, ka, text_scale);
    const Matrix text_visual = detail::gaussian_matrix(map_rng, cfg.dims.text_dim, kv, text_scale);

    Dataset ds;
    ds.dims = cfg.dims;
    ds.clips.reserve(cfg.n_clips);
    for (std::size_t c = 0; c < cfg.n_clips; ++c) {
        Rng rng(stream_key(cfg.seed, {0xC11B, cfg.split, c}));
        Vector zs(ks);
        Vector za(ka);
        Vector zv(kv);
        for (double& v : zs) v = rng.normal();
        for (double& v : za) v = rng.normal();
        for (double& v : zv) v = rng.normal();
        Vector audio_latent = zs;
        audio_latent.insert(audio_latent.end(), za.begin(), za.end());
        Vector visual_latent = zs;
        visual_latent.insert(visual_latent.end(), zv.begin(), zv.end());

        Clip clip;
        char id[48];
        std::snprintf(id, sizeof(id), "s%llu-%05zu", static_cast<unsigned long long>(cfg.split), c);
        clip.id = id;

        auto features = [&](const Matrix& map, const Vector& latent) {
            Vector clean(map.rows(), 0.0);
            detail::accumulate_mapped(clean, map, latent);
            Matrix out(cfg.rows_per_clip, map.rows());
            for (std::size_t r = 0; r < out.rows(); ++r) {
                auto row = out.row(r);
                for (std::size_t d = 0; d < row.size(); ++d) {
                    row[d] = detail::round_f32(clean[d] + cfg.noise_sigma * rng.normal());
                }
            }
            return out;
        };
        clip.audio = features(audio_map, audio_latent);
        clip.visual = features(visual_map, visual_latent);

        Vector shared_text(cfg.dims.text_dim, 0.0);
        detail::accumulate_mapped(shared_text, text_shared, zs);
        Vector audio_text(cfg.dims.text_dim, 0.0);
        detail::accumulate_mapped(audio_text, text_audio, za);
        Vector visual_text(cfg.dims.text_dim, 0.0);
        detail::accumulate_mapped(visual_text, text_visual, zv);

        for (CaptionType t : all_caption_types) {
            for (std::size_t k = 0; k < cfg.captions_per_type; ++k) {
                Vector cap(cfg.dims.text_dim);
                for (std::size_t d = 0; d < cap.size(); ++d) {
                    double v = shared_text[d];
                    if (t != CaptionType::visual) v += audio_text[d];
                    if (t != CaptionType::audio) v += visual_text[d];
                    cap[d] = detail::round_f32(v + cfg.noise_sigma * rng.normal());
                }
                clip.captions_of(t).push_back(std::move(cap));
            }
        }
        ds.clips.push_back(std::move(clip));
    }
    return ds;
}

} // namespace trimodal
