#pragma once

// Crossmodal retrieval: ranking, recall@k and the seven-task suite.

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "trimodal/data.hpp"
#include "trimodal/matrix.hpp"
#include "trimodal/model.hpp"
#include "trimodal/regime.hpp"

namespace trimodal {

/// Database indices by descending similarity to the query; ties go to the
/// lower index.
inline std::vector<std::size_t> rank_database(std::span<const double> query, const Matrix& database) {
    if (database.rows() == 0) {
        throw empty_input_error("rank_database: empty database");
    }
    if (query.size() != database.cols()) {
        throw shape_error("rank_database: query of length " + std::to_string(query.size()) + " against database " +
                          database.shape());
    }
    std::vector<double> sims(database.rows());
    for (std::size_t i = 0; i < sims.size(); ++i) {
        sims[i] = dot(query, database.row(i));
    }
    std::vector<std::size_t> order(sims.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&sims](std::size_t a, std::size_t b) {
        return sims[a] != sims[b] ? sims[a] > sims[b] : a < b;
    });
    return order;
}

/// 0-based rank of `target` under rank_database's ordering, without sorting.
inline std::size_t rank_of(std::span<const double> query, const Matrix& database, std::size_t target) {
    const double t = dot(query, database.row(target));
    std::size_t rank = 0;
    for (std::size_t i = 0; i < database.rows(); ++i) {
        if (i == target) {
            continue;
        }
        const double s = dot(query, database.row(i));
        if (s > t || (s == t && i < target)) {
            ++rank;
        }
    }
    return rank;
}

/// Fraction of queries whose ground-truth database row is among the top k.
inline double recall_at_k(const Matrix& queries, const Matrix& database, std::span<const std::size_t> ground_truth,
                          std::size_t k) {
    if (k == 0) {
        throw parameter_error("recall_at_k: k must be at least 1");
    }
    if (database.rows() == 0) {
        throw empty_input_error("recall_at_k: empty database");
    }
    if (queries.rows() == 0) {
        throw empty_input_error("recall_at_k: no queries");
    }
    if (ground_truth.size() != queries.rows()) {
        throw shape_error("recall_at_k: " + std::to_string(ground_truth.size()) + " ground-truth entries for " +
                          std::to_string(queries.rows()) + " queries");
    }
    if (queries.cols() != database.cols()) {
        throw shape_error("recall_at_k: queries " + queries.shape() + " vs database " + database.shape());
    }
    std::size_t hits = 0;
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        if (ground_truth[q] >= database.rows()) {
            throw mapping_error("recall_at_k: query " + std::to_string(q) + " maps to database row " +
                                std::to_string(ground_truth[q]) + " of " + std::to_string(database.rows()));
        }
        if (rank_of(queries.row(q), database, ground_truth[q]) < k) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(queries.rows());
}

/// Id-keyed variant: each query's ground truth is the database item with the
/// same clip id.
inline double recall_at_k(const Matrix& queries, std::span<const std::string> query_clip_ids, const Matrix& database,
                          std::span<const std::string> database_clip_ids, std::size_t k) {
    if (database_clip_ids.size() != database.rows()) {
        throw shape_error("recall_at_k: database ids do not match database rows");
    }
    std::unordered_map<std::string, std::size_t> where;
    for (std::size_t i = 0; i < database_clip_ids.size(); ++i) {
        where.emplace(database_clip_ids[i], i);
    }
    std::vector<std::size_t> truth;
    truth.reserve(query_clip_ids.size());
    for (const auto& id : query_clip_ids) {
        auto it = where.find(id);
        if (it == where.end()) {
            throw mapping_error("recall_at_k: ground-truth clip " + id + " is not in the database");
        }
        truth.push_back(it->second);
    }
    return recall_at_k(queries, database, truth, k);
}

// ---------------------------------------------------------------------------
// Task suite

enum class QuerySource { visual_captions, audio_captions, audio_visual_captions, audio };

inline std::string_view to_string(QuerySource s) {
    switch (s) {
    case QuerySource::visual_captions: return "visual_captions";
    case QuerySource::audio_captions: return "audio_captions";
    case QuerySource::audio_visual_captions: return "audio_visual_captions";
    case QuerySource::audio: return "audio";
    }
    return "?";
}

inline std::string_view display_name(QuerySource s) {
    switch (s) {
    case QuerySource::visual_captions: return "Visual Captions";
    case QuerySource::audio_captions: return "Audio Captions";
    case QuerySource::audio_visual_captions: return "Audio-Visual Captions";
    case QuerySource::audio: return "Audio";
    }
    return "?";
}

struct RetrievalTask {
    Modality retrieve = Modality::visual;
    QuerySource based_on = QuerySource::visual_captions;
};

/// The seven tasks in report order.
inline constexpr std::array<RetrievalTask, 7> retrieval_tasks{{
    {Modality::visual, QuerySource::visual_captions},
    {Modality::visual, QuerySource::audio_captions},
    {Modality::visual, QuerySource::audio_visual_captions},
    {Modality::audio, QuerySource::audio_captions},
    {Modality::audio, QuerySource::visual_captions},
    {Modality::audio, QuerySource::audio_visual_captions},
    {Modality::visual, QuerySource::audio},
}};

struct TaskResult {
    RetrievalTask task;
    std::optional<double> recall; // empty when skipped
    std::size_t queries = 0;
    std::size_t database = 0;
    std::string skip_reason;
};

struct RetrievalReport {
    std::size_t k = 10;
    std::string model_tag;
    std::uint64_t dataset_fingerprint = 0;
    std::vector<TaskResult> rows;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["k"] = k;
        j["model"] = model_tag;
        char fp[20];
        std::snprintf(fp, sizeof(fp), "%016llx", static_cast<unsigned long long>(dataset_fingerprint));
        j["dataset_fingerprint"] = fp;
        j["tasks"] = nlohmann::ordered_json::array();
        for (const auto& r : rows) {
            nlohmann::ordered_json t;
            t["retrieve"] = to_string(r.task.retrieve);
            t["based_on"] = to_string(r.task.based_on);
            if (r.recall) {
                t["recall"] = *r.recall;
            } else {
                t["recall"] = nullptr;
                t["skipped"] = r.skip_reason;
            }
            t["queries"] = r.queries;
            t["database"] = r.database;
            j["tasks"].push_back(std::move(t));
        }
        return j;
    }
};

struct SuiteOptions {
    std::size_t k = 10;
    bool all_captions = true; // every caption is a query; otherwise caption #0 only
    std::string model_tag;
};

inline std::optional<CaptionType> caption_type_of(QuerySource s) {
    switch (s) {
    case QuerySource::visual_captions: return CaptionType::visual;
    case QuerySource::audio_captions: return CaptionType::audio;
    case QuerySource::audio_visual_captions: return CaptionType::audio_visual;
    case QuerySource::audio: return std::nullopt;
    }
    return std::nullopt;
}

/// Embeds every clip and caption with the aligner and scores all seven tasks.
/// A task whose captions are absent from the dataset is reported as skipped.
inline RetrievalReport run_task_suite(const TrimodalAligner& aligner, const Dataset& ds, const SuiteOptions& options = {}) {
    if (ds.clips.empty()) {
        throw empty_input_error("run_task_suite: dataset has no clips");
    }
    if (aligner.audio.in_dim() != ds.dims.audio_dim || aligner.visual.in_dim() != ds.dims.visual_dim ||
        aligner.text.in_dim() != ds.dims.text_dim) {
        throw shape_error("run_task_suite: aligner input dims do not match the dataset");
    }
    const std::size_t n = ds.clips.size();
    const std::size_t d = aligner.text.out_dim();
    Matrix audio(n, d);
    Matrix visual(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const Vector a = embed_modality(aligner.audio, ds.clips[i].audio);
        const Vector v = embed_modality(aligner.visual, ds.clips[i].visual);
        std::copy(a.begin(), a.end(), audio.row(i).begin());
        std::copy(v.begin(), v.end(), visual.row(i).begin());
    }

    RetrievalReport report;
    report.k = options.k;
    report.model_tag = options.model_tag;
    report.dataset_fingerprint = ds.fingerprint();
    for (const RetrievalTask& task : retrieval_tasks) {
        TaskResult row;
        row.task = task;
        const Matrix& database = task.retrieve == Modality::audio ? audio : visual;
        row.database = n;
        std::vector<std::size_t> truth;
        Matrix queries;
        if (const auto type = caption_type_of(task.based_on)) {
            std::vector<double> flat;
            for (std::size_t i = 0; i < n; ++i) {
                const auto& caps = ds.clips[i].captions_of(*type);
                const std::size_t take = options.all_captions ? caps.size() : std::min<std::size_t>(1, caps.size());
                for (std::size_t c = 0; c < take; ++c) {
                    const Vector e = embed_modality(aligner.text, Matrix::from_row(caps[c]));
                    flat.insert(flat.end(), e.begin(), e.end());
                    truth.push_back(i);
                }
            }
            if (truth.empty()) {
                row.skip_reason = "dataset has no " + std::string(to_string(*type)) + " captions";
                report.rows.push_back(std::move(row));
                continue;
            }
            queries = Matrix(truth.size(), d, std::move(flat));
        } else {
            queries = audio;
            truth.resize(n);
            std::iota(truth.begin(), truth.end(), std::size_t{0});
        }
        row.queries = truth.size();
        row.recall = recall_at_k(queries, database, truth, options.k);
        report.rows.push_back(std::move(row));
    }
    return report;
}

/// Text table with one row per task and one recall column per report.
inline std::string format_table(const std::vector<const RetrievalReport*>& reports) {
    std::vector<std::string> headers{"Retrieve", "Based On"};
    for (const auto* r : reports) {
        headers.push_back(r->model_tag.empty() ? "model" : r->model_tag);
    }
    std::vector<std::vector<std::string>> cells;
    for (std::size_t t = 0; t < retrieval_tasks.size(); ++t) {
        const RetrievalTask& task = retrieval_tasks[t];
        std::vector<std::string> row{task.retrieve == Modality::audio ? "Audio" : "Visual",
                                     std::string(display_name(task.based_on))};
        for (const auto* r : reports) {
            std::string cell = "-";
            if (t < r->rows.size() && r->rows[t].recall) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.4f", *r->rows[t].recall);
                cell = buf;
            } else if (t < r->rows.size()) {
                cell = "skipped";
            }
            row.push_back(cell);
        }
        cells.push_back(std::move(row));
    }
    std::vector<std::size_t> width(headers.size());
    for (std::size_t c = 0; c < headers.size(); ++c) {
        width[c] = headers[c].size();
        for (const auto& row : cells) {
            width[c] = std::max(width[c], row[c].size());
        }
    }
    auto render = [&width](const std::vector<std::string>& row) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0) line += " | ";
            line += row[c];
            if (c + 1 < row.size()) line += std::string(width[c] - row[c].size(), ' ');
        }
        return line + "\n";
    };
    std::string out = render(headers);
    std::size_t total = 0;
    for (std::size_t w : width) total += w;
    out += std::string(total + 3 * (width.size() - 1), '-') + "\n";
    for (const auto& row : cells) {
        out += render(row);
    }
    return out;
}

inline std::string format_table(const RetrievalReport& report) { return format_table({&report}); }

} // namespace trimodal
