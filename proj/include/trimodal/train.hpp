#pragma once

// Forward/backward over a minibatch, the epoch loops of the single- and
// two-stage regimes, and checkpoint I/O.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trimodal/data.hpp"
#include "trimodal/loss.hpp"
#include "trimodal/matrix.hpp"
#include "trimodal/model.hpp"
#include "trimodal/optim.hpp"
#include "trimodal/regime.hpp"
#include "trimodal/rng.hpp"

namespace trimodal {

struct TrainConfig {
    std::size_t epochs = 20;
    double lr = 1e-5;
    double weight_decay = 0.1;
    std::size_t batch_size = 32;
    double tau = 0.07;
    std::uint64_t seed = 0;
    bool bias_enabled = false;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    AdamWConfig adamw() const { return {lr, weight_decay, beta1, beta2, epsilon}; }

    /// Canonical one-line rendering; also the input of config_hash().
    std::string canonical() const {
        char buf[512];
        std::snprintf(buf, sizeof(buf),
                      "epochs=%zu;lr=%.17g;weight_decay=%.17g;batch_size=%zu;tau=%.17g;seed=%llu;"
                      "bias_enabled=%d;beta1=%.17g;beta2=%.17g;epsilon=%.17g",
                      epochs, lr, weight_decay, batch_size, tau, static_cast<unsigned long long>(seed),
                      bias_enabled ? 1 : 0, beta1, beta2, epsilon);
        return buf;
    }

    std::uint64_t config_hash() const {
        const std::string s = canonical();
        Fnv1a h;
        h.update(s.data(), s.size());
        return h.digest();
    }

    void validate() const {
        if (epochs == 0) throw parameter_error("epochs must be at least 1");
        if (batch_size < 2) throw parameter_error("batch_size must be at least 2");
        if (!(tau > 0.0)) throw parameter_error("tau must be positive");
        if (!(lr >= 0.0)) throw parameter_error("lr must be non-negative");
        if (!(weight_decay >= 0.0)) throw parameter_error("weight_decay must be non-negative");
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
            throw parameter_error("adam betas must lie in (0, 1)");
        }
        if (!(epsilon > 0.0)) throw parameter_error("epsilon must be positive");
    }
};

inline AlignerConfig aligner_config_for(const DatasetDims& dims, const TrainConfig& config) {
    AlignerConfig out;
    out.visual_dim = dims.visual_dim;
    out.audio_dim = dims.audio_dim;
    out.text_dim = dims.text_dim;
    out.bias_enabled = config.bias_enabled;
    out.tau = config.tau;
    return out;
}

// ---------------------------------------------------------------------------
// Forward and backward

/// Per-modality state kept from the forward pass for the backward pass.
struct ModalityCache {
    Matrix mean_inputs;                // B x in_dim, row-mean of raw features per clip
    std::vector<double> pooled_norms;  // norm before normalization
    std::vector<bool> degenerate;
};

struct ForwardPass {
    TriBatch batch;
    std::array<ModalityCache, 3> cache; // indexed by Modality
    std::array<bool, 3> computed{};     // modality embedded in this pass
};

namespace detail {

inline void embed_into(const ProjectionHead& head, const std::vector<const Matrix*>& inputs, Matrix& embedded,
                       ModalityCache& cache) {
    const std::size_t b = inputs.size();
    std::size_t total_rows = 0;
    for (const Matrix* m : inputs) {
        total_rows += m->rows();
    }
    // One product over the stacked rows of the whole batch; each output row is
    // computed independently, so this matches clip-by-clip projection bitwise.
    Matrix stacked(total_rows, head.in_dim());
    cache.mean_inputs = Matrix(b, head.in_dim());
    std::size_t at = 0;
    for (std::size_t i = 0; i < b; ++i) {
        const Matrix& x = *inputs[i];
        if (x.cols() != head.in_dim()) {
            throw shape_error("projection expects " + std::to_string(head.in_dim()) + " input columns, got " +
                              x.shape());
        }
        std::copy(x.data().begin(), x.data().end(), stacked.row(at).begin());
        at += x.rows();
        const Vector mean = mean_pool_rows(x);
        std::copy(mean.begin(), mean.end(), cache.mean_inputs.row(i).begin());
    }
    const Matrix projected = project_rows(head, stacked);

    embedded = Matrix(b, head.out_dim());
    cache.pooled_norms.assign(b, 0.0);
    cache.degenerate.assign(b, false);
    at = 0;
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t rows = inputs[i]->rows();
        Matrix slice(rows, head.out_dim(),
                     std::vector<double>(projected.row(at).begin(), projected.row(at).begin() + rows * head.out_dim()));
        at += rows;
        auto normalized = l2_normalize_rows_detailed(Matrix::from_row(mean_pool_rows(slice)));
        std::copy(normalized.values.data().begin(), normalized.values.data().end(), embedded.row(i).begin());
        cache.pooled_norms[i] = normalized.norms[0];
        cache.degenerate[i] = normalized.degenerate[0];
    }
}

} // namespace detail

/// Embeds the planned clips with the aligner's heads. `needed` limits which
/// modalities are computed; skipped ones are left as empty matrices.
inline ForwardPass embed_batch(const TrimodalAligner& aligner, const Dataset& ds, const BatchPlan& plan,
                               std::array<bool, 3> needed = {true, true, true}) {
    ForwardPass out;
    out.batch.caption_type = plan.caption_type;
    out.computed = needed;
    std::vector<const Matrix*> audio;
    std::vector<const Matrix*> visual;
    std::vector<Matrix> text_rows;
    text_rows.reserve(plan.clips.size());
    for (std::size_t i = 0; i < plan.clips.size(); ++i) {
        const Clip& clip = ds.clips.at(plan.clips[i]);
        out.batch.clip_ids.push_back(clip.id);
        audio.push_back(&clip.audio);
        visual.push_back(&clip.visual);
        const auto& caps = clip.captions_of(plan.caption_type);
        if (plan.caption_choice.at(i) >= caps.size()) {
            throw data_mismatch_error("clip " + clip.id + " has no " + std::string(to_string(plan.caption_type)) +
                                      " caption #" + std::to_string(plan.caption_choice[i]));
        }
        text_rows.push_back(Matrix::from_row(caps[plan.caption_choice[i]]));
    }
    std::vector<const Matrix*> text;
    for (const auto& m : text_rows) {
        text.push_back(&m);
    }
    auto idx = [](Modality m) { return static_cast<std::size_t>(m); };
    if (needed[idx(Modality::audio)]) {
        detail::embed_into(aligner.audio, audio, out.batch.audio, out.cache[idx(Modality::audio)]);
    }
    if (needed[idx(Modality::visual)]) {
        detail::embed_into(aligner.visual, visual, out.batch.visual, out.cache[idx(Modality::visual)]);
    }
    if (needed[idx(Modality::text)]) {
        detail::embed_into(aligner.text, text, out.batch.text, out.cache[idx(Modality::text)]);
    }
    return out;
}

struct HeadGradient {
    Matrix weight;
    Vector bias;
};

struct BatchGradients {
    RegimeLoss loss;
    std::array<std::optional<HeadGradient>, 3> heads; // indexed by Modality; empty when frozen
};

inline std::array<bool, 3> modalities_in(const std::vector<Pair>& pairs) {
    std::array<bool, 3> out{};
    for (Pair p : pairs) {
        out[static_cast<std::size_t>(first_modality(p))] = true;
        out[static_cast<std::size_t>(second_modality(p))] = true;
    }
    return out;
}

/// Loss and the gradient of the total loss with respect to every trainable
/// head's parameters. The embedding-level gradient is chained through
/// normalization ((I - u u^T) / |p|), mean pooling (1/M per row) and the
/// linear projection (mean input transposed times the pooled gradient).
inline BatchGradients batch_gradients(const TrimodalAligner& aligner, const Dataset& ds, const BatchPlan& plan,
                                      const Phase& phase) {
    const auto pairs = active_pairs(phase, plan.caption_type);
    const ForwardPass fwd = embed_batch(aligner, ds, plan, modalities_in(pairs));

    BatchGradients out;
    out.loss = regime_loss(fwd.batch, aligner, phase);

    std::array<std::optional<Matrix>, 3> unit_grads;
    auto add = [&unit_grads](Modality m, const Matrix& g) {
        auto& slot = unit_grads[static_cast<std::size_t>(m)];
        if (!slot) {
            slot = g;
            return;
        }
        auto dst = slot->data();
        auto src = g.data();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += src[i];
        }
    };
    for (Pair p : all_pairs) {
        if (const auto& term = out.loss.component(p)) {
            add(first_modality(p), term->grad_a);
            add(second_modality(p), term->grad_b);
        }
    }

    for (Modality m : all_modalities) {
        const auto k = static_cast<std::size_t>(m);
        const ProjectionHead& head = aligner.head(m);
        if (!head.trainable || !unit_grads[k]) {
            continue;
        }
        const Matrix& units = fwd.batch.modality(m);
        const ModalityCache& cache = fwd.cache[k];
        Matrix pooled_grad(units.rows(), units.cols());
        for (std::size_t i = 0; i < units.rows(); ++i) {
            if (cache.degenerate[i]) {
                continue;
            }
            const auto u = units.row(i);
            const auto g = unit_grads[k]->row(i);
            const double radial = dot(u, g);
            const double inv_norm = 1.0 / cache.pooled_norms[i];
            auto dst = pooled_grad.row(i);
            for (std::size_t c = 0; c < dst.size(); ++c) {
                dst[c] = (g[c] - radial * u[c]) * inv_norm;
            }
        }
        HeadGradient hg;
        hg.weight = matmul_transpose_a(cache.mean_inputs, pooled_grad);
        hg.bias.assign(head.out_dim(), 0.0);
        if (head.bias_enabled) {
            for (std::size_t i = 0; i < pooled_grad.rows(); ++i) {
                const auto row = pooled_grad.row(i);
                for (std::size_t c = 0; c < row.size(); ++c) {
                    hg.bias[c] += row[c];
                }
            }
        }
        out.heads[k] = std::move(hg);
    }
    return out;
}

/// AdamW moment buffers for every head's weight and bias.
struct OptimizerStates {
    std::array<AdamWState, 3> weight;
    std::array<AdamWState, 3> bias;

    static OptimizerStates for_aligner(const TrimodalAligner& aligner) {
        OptimizerStates s;
        for (Modality m : all_modalities) {
            const auto k = static_cast<std::size_t>(m);
            s.weight[k] = AdamWState(aligner.head(m).weight.size());
            s.bias[k] = AdamWState(aligner.head(m).bias.size());
        }
        return s;
    }
};

/// One optimization step on one minibatch. Only heads flagged trainable are
/// touched; the bias is stepped only when enabled.
inline RegimeLoss train_step(TrimodalAligner& aligner, const Dataset& ds, const BatchPlan& plan, const Phase& phase,
                             OptimizerStates& states, const AdamWConfig& optim) {
    BatchGradients grads = batch_gradients(aligner, ds, plan, phase);
    bool finite = std::isfinite(grads.loss.total);
    for (const auto& g : grads.heads) {
        if (g) {
            finite = finite && g->weight.all_finite() &&
                     std::all_of(g->bias.begin(), g->bias.end(), [](double v) { return std::isfinite(v); });
        }
    }
    if (!finite) {
        std::string ids;
        for (std::size_t i : plan.clips) {
            ids += (ids.empty() ? "" : ",") + ds.clips[i].id;
        }
        throw divergence_error("non-finite loss or gradient in epoch " + std::to_string(plan.epoch + 1) + " batch " +
                               std::to_string(plan.index) + " (clips " + ids + ")");
    }
    for (Modality m : all_modalities) {
        const auto k = static_cast<std::size_t>(m);
        if (!grads.heads[k]) {
            continue;
        }
        ProjectionHead& head = aligner.head(m);
        const std::string name(to_string(m));
        adamw_step(optim, states.weight[k], head.weight.data(), grads.heads[k]->weight.data(), name + " weight");
        if (head.bias_enabled) {
            adamw_step(optim, states.bias[k], head.bias, grads.heads[k]->bias, name + " bias");
        }
    }
    return std::move(grads.loss);
}

// ---------------------------------------------------------------------------
// Epoch loops

struct LossTraceRow {
    int stage = 1;
    std::size_t epoch = 1; // 1-based
    std::size_t batch = 0;
    CaptionType caption_type = CaptionType::audio_visual;
    std::array<std::optional<double>, 3> components; // indexed by Pair
    double total = 0.0;
};

struct EpochSummary {
    int stage = 1;
    std::size_t epoch = 1;
    double mean_total = 0.0;
    std::optional<double> validation_total;
};

struct TrainResult {
    TrimodalAligner aligner;
    Regime regime = Regime::slava_av_3loss;
    std::vector<LossTraceRow> trace;
    std::vector<EpochSummary> epochs;
    std::array<std::optional<std::size_t>, 2> selected_epoch; // per stage, when validating

    /// Epoch means of one stage in order.
    std::vector<double> stage_means(int stage) const {
        std::vector<double> out;
        for (const auto& e : epochs) {
            if (e.stage == stage) {
                out.push_back(e.mean_total);
            }
        }
        return out;
    }
};

/// Mean total loss over a fixed set of batches without updating anything.
inline double evaluate_loss(const TrimodalAligner& aligner, const Dataset& ds, const Phase& phase,
                            const TrainConfig& config) {
    const auto plans = make_batches(ds, config.batch_size, phase, stream_key(config.seed, {0x7A1, 0}), 0);
    if (plans.empty()) {
        throw empty_input_error("validation set yields no batch of at least two clips");
    }
    double sum = 0.0;
    for (const auto& plan : plans) {
        const auto pairs = active_pairs(phase, plan.caption_type);
        const ForwardPass fwd = embed_batch(aligner, ds, plan, modalities_in(pairs));
        sum += regime_loss(fwd.batch, aligner, phase).total;
    }
    return sum / static_cast<double>(plans.size());
}

/// Runs one stage for config.epochs epochs, appending to `result`. With a
/// validation set the aligner is rolled back to the epoch with the lowest
/// validation loss.
inline void run_stage(TrainResult& result, const Dataset& ds, const Phase& phase, const TrainConfig& config,
                      const Dataset* validation) {
    check_phase_data(ds, phase);
    if (validation) {
        check_phase_data(*validation, phase);
    }
    TrimodalAligner& aligner = result.aligner;
    for (Modality m : all_modalities) {
        aligner.head(m).trainable = is_trainable(phase, m);
    }
    OptimizerStates states = OptimizerStates::for_aligner(aligner);
    const AdamWConfig optim = config.adamw();
    const std::uint64_t batch_seed = stream_key(config.seed, {0xBA7C, static_cast<std::uint64_t>(phase.stage)});

    std::optional<double> best_loss;
    std::optional<TrimodalAligner> best;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto plans = make_batches(ds, config.batch_size, phase, batch_seed, epoch);
        if (plans.empty()) {
            throw empty_input_error("training set yields no batch of at least two clips");
        }
        double sum = 0.0;
        for (const auto& plan : plans) {
            RegimeLoss loss = train_step(aligner, ds, plan, phase, states, optim);
            LossTraceRow row;
            row.stage = phase.stage;
            row.epoch = epoch + 1;
            row.batch = plan.index;
            row.caption_type = plan.caption_type;
            for (Pair p : all_pairs) {
                if (const auto& term = loss.component(p)) {
                    row.components[static_cast<std::size_t>(p)] = term->value;
                }
            }
            row.total = loss.total;
            sum += loss.total;
            result.trace.push_back(row);
        }
        EpochSummary summary{phase.stage, epoch + 1, sum / static_cast<double>(plans.size()), std::nullopt};
        if (validation) {
            const double v = evaluate_loss(aligner, *validation, phase, config);
            summary.validation_total = v;
            if (!best_loss || v < *best_loss) {
                best_loss = v;
                best = aligner;
                result.selected_epoch[static_cast<std::size_t>(phase.stage - 1)] = epoch + 1;
            }
        }
        result.epochs.push_back(summary);
    }
    if (best) {
        aligner = *best;
    }
    for (Modality m : all_modalities) {
        aligner.head(m).trainable = true;
    }
}

/// Visual-text alignment first, then audio-text. With frozen_text the text
/// head keeps its stage-1 parameters through stage 2.
inline TrainResult train_two_stage(const Dataset& ds, const TrainConfig& config, bool frozen_text,
                                   const Dataset* validation = nullptr) {
    config.validate();
    TrainResult result;
    result.regime = frozen_text ? Regime::two_stage_frozen : Regime::two_stage_trainable;
    result.aligner = init_aligner(config.seed, aligner_config_for(ds.dims, config));
    run_stage(result, ds, Phase{result.regime, 1}, config, validation);
    run_stage(result, ds, Phase{result.regime, 2}, config, validation);
    return result;
}

/// All three heads trained jointly under the regime's objective.
inline TrainResult train_single_stage(const Dataset& ds, const TrainConfig& config, Regime regime,
                                      const Dataset* validation = nullptr) {
    if (is_two_stage(regime)) {
        throw parameter_error("regime " + std::string(to_string(regime)) + " is a two-stage regime");
    }
    config.validate();
    TrainResult result;
    result.regime = regime;
    result.aligner = init_aligner(config.seed, aligner_config_for(ds.dims, config));
    run_stage(result, ds, Phase{regime, 1}, config, validation);
    return result;
}

inline TrainResult train_regime(const Dataset& ds, const TrainConfig& config, Regime regime,
                                const Dataset* validation = nullptr) {
    if (is_two_stage(regime)) {
        return train_two_stage(ds, config, regime == Regime::two_stage_frozen, validation);
    }
    return train_single_stage(ds, config, regime, validation);
}

/// CSV rows: stage,epoch,batch,caption_type,av,at,vt,total (absent terms empty).
inline std::string loss_trace_csv(const TrainResult& result) {
    std::string out = "stage,epoch,batch,caption_type,av,at,vt,total\n";
    char buf[64];
    for (const auto& row : result.trace) {
        out += std::to_string(row.stage) + "," + std::to_string(row.epoch) + "," + std::to_string(row.batch) + "," +
               std::string(to_string(row.caption_type));
        for (const auto& c : row.components) {
            out += ",";
            if (c) {
                std::snprintf(buf, sizeof(buf), "%.17g", *c);
                out += buf;
            }
        }
        std::snprintf(buf, sizeof(buf), ",%.17g\n", row.total);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// "TMAL" | u32 format_version | u32 meta length | meta JSON |
// for head in (visual, audio, text): u32 rows | u32 cols | f32 weight[rows*cols]
//                                    u32 1    | u32 cols | f32 bias[cols]
// All integers and floats little-endian.

inline constexpr std::uint32_t checkpoint_format_version = 1;

struct Checkpoint {
    TrimodalAligner aligner;
    std::string regime_tag;
    std::uint64_t config_hash = 0;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
    }
}

class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string where) : bytes_(bytes), where_(std::move(where)) {}

    std::string_view take(std::size_t n, const char* what) {
        if (n > bytes_.size() - pos_) {
            throw format_error(where_ + ": truncated at byte " + std::to_string(pos_) + " reading " + what +
                               " (need " + std::to_string(n) + " bytes, " + std::to_string(bytes_.size() - pos_) +
                               " left)");
        }
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::uint32_t u32(const char* what) {
        const auto b = take(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        }
        return v;
    }

    std::size_t position() const noexcept { return pos_; }
    bool at_end() const noexcept { return pos_ == bytes_.size(); }
    const std::string& where() const noexcept { return where_; }

private:
    std::string_view bytes_;
    std::string where_;
    std::size_t pos_ = 0;
};

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace detail

inline std::string encode_checkpoint(const TrimodalAligner& aligner, std::string_view regime_tag,
                                     std::uint64_t config_hash) {
    nlohmann::ordered_json meta;
    meta["visual_dim"] = aligner.visual.in_dim();
    meta["audio_dim"] = aligner.audio.in_dim();
    meta["text_dim"] = aligner.text.in_dim();
    meta["shared_dim"] = aligner.text.out_dim();
    meta["tau"] = aligner.tau;
    meta["bias_enabled"] = aligner.visual.bias_enabled;
    meta["regime"] = regime_tag;
    meta["config_hash"] = detail::hex64(config_hash);
    const std::string meta_text = meta.dump();

    std::string out = "TMAL";
    detail::put_u32(out, checkpoint_format_version);
    detail::put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
    out += meta_text;
    for (Modality m : all_modalities) {
        const ProjectionHead& head = aligner.head(m);
        detail::put_u32(out, static_cast<std::uint32_t>(head.weight.rows()));
        detail::put_u32(out, static_cast<std::uint32_t>(head.weight.cols()));
        detail::append_f32(out, head.weight.data());
        detail::put_u32(out, 1);
        detail::put_u32(out, static_cast<std::uint32_t>(head.bias.size()));
        detail::append_f32(out, head.bias);
    }
    return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes, const std::string& where = "checkpoint") {
    detail::ByteReader in(bytes, where);
    if (in.take(4, "magic") != "TMAL") {
        throw format_error(where + ": bad magic (expected TMAL)");
    }
    const std::uint32_t version = in.u32("format_version");
    if (version != checkpoint_format_version) {
        throw format_error(where + ": checkpoint format_version " + std::to_string(version) +
                           " is not supported (expected " + std::to_string(checkpoint_format_version) + ")");
    }
    const std::uint32_t meta_len = in.u32("meta length");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(in.take(meta_len, "meta JSON"));
    } catch (const nlohmann::json::exception& e) {
        throw format_error(where + ": meta JSON: " + e.what());
    }

    Checkpoint ck;
    std::array<std::size_t, 3> in_dims{};
    std::size_t shared = 0;
    try {
        in_dims[static_cast<std::size_t>(Modality::visual)] = meta.at("visual_dim").get<std::size_t>();
        in_dims[static_cast<std::size_t>(Modality::audio)] = meta.at("audio_dim").get<std::size_t>();
        in_dims[static_cast<std::size_t>(Modality::text)] = meta.at("text_dim").get<std::size_t>();
        shared = meta.at("shared_dim").get<std::size_t>();
        ck.aligner.tau = meta.at("tau").get<double>();
        const bool bias = meta.at("bias_enabled").get<bool>();
        ck.regime_tag = meta.at("regime").get<std::string>();
        ck.config_hash = std::stoull(meta.at("config_hash").get<std::string>(), nullptr, 16);
        for (Modality m : all_modalities) {
            ck.aligner.head(m).bias_enabled = bias;
        }
    } catch (const std::exception& e) {
        throw format_error(where + ": meta JSON missing or invalid field: " + e.what());
    }
    if (!(ck.aligner.tau > 0.0)) {
        throw format_error(where + ": tau must be positive");
    }

    for (Modality m : all_modalities) {
        const std::string name(to_string(m));
        ProjectionHead& head = ck.aligner.head(m);
        const std::size_t weight_at = in.position();
        const std::uint32_t rows = in.u32("weight rows");
        const std::uint32_t cols = in.u32("weight cols");
        if (rows != in_dims[static_cast<std::size_t>(m)] || cols != shared) {
            throw format_error(where + ": byte " + std::to_string(weight_at) + ": " + name + " weight is " +
                               Matrix::shape_string(rows, cols) + " but meta declares " +
                               Matrix::shape_string(in_dims[static_cast<std::size_t>(m)], shared));
        }
        head.weight = Matrix(rows, cols,
                             detail::decode_f32(in.take(std::size_t{rows} * cols * 4, (name + " weight").c_str())));
        const std::size_t bias_at = in.position();
        const std::uint32_t brows = in.u32("bias rows");
        const std::uint32_t bcols = in.u32("bias cols");
        if (brows != 1 || bcols != shared) {
            throw format_error(where + ": byte " + std::to_string(bias_at) + ": " + name + " bias is " +
                               Matrix::shape_string(brows, bcols) + ", expected " + Matrix::shape_string(1, shared));
        }
        head.bias = detail::decode_f32(in.take(std::size_t{bcols} * 4, (name + " bias").c_str()));
        if (!head.weight.all_finite()) {
            throw format_error(where + ": " + name + " weight contains non-finite values");
        }
    }
    if (!in.at_end()) {
        throw format_error(where + ": " + std::to_string(bytes.size() - in.position()) +
                           " trailing bytes after the text head");
    }
    return ck;
}

inline void save_checkpoint(const TrimodalAligner& aligner, const std::filesystem::path& path,
                            std::string_view regime_tag = "untrained", std::uint64_t config_hash = 0) {
    detail::write_file(path, encode_checkpoint(aligner, regime_tag, config_hash));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(detail::read_file(path), path.string());
}

} // namespace trimodal
