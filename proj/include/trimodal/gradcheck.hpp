#pragma once

// Central finite-difference checks of the analytic gradients. The numerical
// side only ever calls forward functions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

#include "trimodal/data.hpp"
#include "trimodal/loss.hpp"
#include "trimodal/rng.hpp"
#include "trimodal/train.hpp"

namespace trimodal {

struct GradcheckOptions {
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    double step = 1e-5;
    std::size_t max_batch = 8;
    std::size_t max_dim = 16;
};

struct GradcheckSummary {
    std::size_t trials = 0;
    double max_rel_error_info_nce = 0.0;
    double max_rel_error_end_to_end = 0.0;

    double max_rel_error() const { return std::max(max_rel_error_info_nce, max_rel_error_end_to_end); }
};

/// max |analytic - numeric| / max(max |numeric|, 1e-8) over one gradient.
inline double gradient_rel_error(std::span<const double> analytic, std::span<const double> numeric) {
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        scale = std::max(scale, std::abs(numeric[i]));
    }
    return diff / std::max(scale, 1e-8);
}

inline std::vector<double> central_difference(std::span<double> params, const std::function<double()>& f,
                                              double h) {
    std::vector<double> out(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = f();
        params[i] = saved - h;
        const double down = f();
        params[i] = saved;
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

namespace detail {

inline Matrix random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.data()) {
        v = rng.normal();
    }
    return l2_normalize_rows(m);
}

inline std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

} // namespace detail

/// InfoNCE gradient with respect to both embedding matrices on one random
/// instance.
inline double check_info_nce_once(Rng& rng, const GradcheckOptions& opt) {
    const std::size_t b = detail::between(rng, 1, opt.max_batch);
    const std::size_t dim = detail::between(rng, 2, opt.max_dim);
    const double tau = rng.uniform(0.05, 1.0);
    Matrix a = detail::random_unit_rows(rng, b, dim);
    Matrix c = detail::random_unit_rows(rng, b, dim);
    const PairLoss analytic = info_nce_grad(a, c, tau);
    auto f = [&] { return info_nce(similarity_logits(a, c, tau)); };
    const auto num_a = central_difference(a.data(), f, opt.step);
    const auto num_c = central_difference(c.data(), f, opt.step);
    return std::max(gradient_rel_error(analytic.grad_a.data(), num_a),
                    gradient_rel_error(analytic.grad_b.data(), num_c));
}

/// Builds a toy dataset and aligner and checks d(total regime loss)/d(every
/// trainable weight and bias) through the full forward pipeline.
inline double check_end_to_end_once(Rng& rng, const GradcheckOptions& opt) {
    DatasetDims dims{detail::between(rng, 2, opt.max_dim), detail::between(rng, 2, opt.max_dim),
                     detail::between(rng, 2, opt.max_dim)};
    const std::size_t b = detail::between(rng, 2, opt.max_batch);
    Dataset ds;
    ds.dims = dims;
    for (std::size_t i = 0; i < b; ++i) {
        Clip clip;
        clip.id = "g" + std::to_string(i);
        clip.audio = Matrix(detail::between(rng, 1, 3), dims.audio_dim);
        clip.visual = Matrix(detail::between(rng, 1, 3), dims.visual_dim);
        for (double& v : clip.audio.data()) v = rng.normal();
        for (double& v : clip.visual.data()) v = rng.normal();
        for (CaptionType t : all_caption_types) {
            Vector cap(dims.text_dim);
            for (double& v : cap) v = rng.normal();
            clip.captions_of(t).push_back(std::move(cap));
        }
        ds.clips.push_back(std::move(clip));
    }

    const Regime regime = all_regimes[rng.below(all_regimes.size())];
    const Phase phase{regime, static_cast<int>(detail::between(rng, 1, static_cast<std::size_t>(stage_count(regime))))};
    const auto types = caption_types_for(phase);
    BatchPlan plan;
    plan.caption_type = types[rng.below(types.size())];
    for (std::size_t i = 0; i < b; ++i) {
        plan.clips.push_back(i);
        plan.caption_choice.push_back(0);
    }

    AlignerConfig cfg;
    cfg.audio_dim = dims.audio_dim;
    cfg.visual_dim = dims.visual_dim;
    cfg.text_dim = dims.text_dim;
    cfg.shared_dim = detail::between(rng, 2, opt.max_dim);
    cfg.bias_enabled = rng.coin();
    cfg.tau = rng.uniform(0.05, 1.0);
    TrimodalAligner aligner = init_aligner(rng.next_u64(), cfg);
    for (Modality m : all_modalities) {
        aligner.head(m).trainable = is_trainable(phase, m);
        if (cfg.bias_enabled) {
            for (double& v : aligner.head(m).bias) v = rng.uniform(-0.1, 0.1);
        }
    }

    const BatchGradients analytic = batch_gradients(aligner, ds, plan, phase);
    auto f = [&] {
        const ForwardPass fwd = embed_batch(aligner, ds, plan);
        return regime_loss(fwd.batch, aligner, phase).total;
    };
    double worst = 0.0;
    for (Modality m : all_modalities) {
        const auto& g = analytic.heads[static_cast<std::size_t>(m)];
        if (!g) {
            continue;
        }
        ProjectionHead& head = aligner.head(m);
        worst = std::max(worst, gradient_rel_error(g->weight.data(), central_difference(head.weight.data(), f, opt.step)));
        if (head.bias_enabled) {
            worst = std::max(worst, gradient_rel_error(g->bias, central_difference(head.bias, f, opt.step)));
        }
    }
    return worst;
}

inline GradcheckSummary run_gradcheck(const GradcheckOptions& opt) {
    GradcheckSummary s;
    Rng rng(stream_key(opt.seed, {0x6C, 0}));
    for (std::size_t t = 0; t < opt.trials; ++t) {
        s.max_rel_error_info_nce = std::max(s.max_rel_error_info_nce, check_info_nce_once(rng, opt));
        s.max_rel_error_end_to_end = std::max(s.max_rel_error_end_to_end, check_end_to_end_once(rng, opt));
        ++s.trials;
    }
    return s;
}

} // namespace trimodal
