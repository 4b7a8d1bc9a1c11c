#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "trimodal/matrix.hpp"
#include "trimodal/rng.hpp"

namespace trimodal {

enum class Modality { audio, visual, text };

inline std::string_view to_string(Modality m) {
    switch (m) {
    case Modality::audio: return "audio";
    case Modality::visual: return "visual";
    case Modality::text: return "text";
    }
    return "?";
}

/// Linear map from an encoder's output space into the shared space. The weight
/// is stored in_dim x out_dim so a batch of rows projects as x * weight.
struct ProjectionHead {
    Matrix weight;
    Vector bias;
    bool bias_enabled = false;
    bool trainable = true;

    std::size_t in_dim() const noexcept { return weight.rows(); }
    std::size_t out_dim() const noexcept { return weight.cols(); }

    friend bool operator==(const ProjectionHead&, const ProjectionHead&) = default;
};

struct AlignerConfig {
    std::size_t visual_dim = 768;
    std::size_t audio_dim = 768;
    std::size_t text_dim = 512;
    std::size_t shared_dim = 512;
    bool bias_enabled = false;
    double tau = 0.07;
};

struct TrimodalAligner {
    ProjectionHead visual;
    ProjectionHead audio;
    ProjectionHead text;
    double tau = 0.07;

    ProjectionHead& head(Modality m) noexcept {
        return m == Modality::audio ? audio : m == Modality::visual ? visual : text;
    }
    const ProjectionHead& head(Modality m) const noexcept {
        return m == Modality::audio ? audio : m == Modality::visual ? visual : text;
    }

    friend bool operator==(const TrimodalAligner&, const TrimodalAligner&) = default;
};

inline constexpr std::array<Modality, 3> all_modalities{Modality::visual, Modality::audio,
                                                        Modality::text};

namespace detail {

inline ProjectionHead init_head(std::uint64_t seed, std::uint64_t head_index, std::size_t in_dim,
                                std::size_t out_dim, bool bias_enabled) {
    if (in_dim == 0 || out_dim == 0) {
        throw parameter_error("projection head dimensions must be positive");
    }
    ProjectionHead head;
    head.weight = Matrix(in_dim, out_dim);
    head.bias.assign(out_dim, 0.0);
    head.bias_enabled = bias_enabled;
    // Entries are rounded to float so that the initial state survives a
    // checkpoint round trip exactly.
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    Rng rng(stream_key(seed, {0x1417, head_index}));
    for (double& w : head.weight.data()) {
        w = static_cast<double>(static_cast<float>(rng.uniform(-bound, bound)));
        if (std::abs(w) > bound) {
            w = std::copysign(static_cast<double>(std::nextafter(static_cast<float>(bound), 0.0f)), w);
        }
    }
    return head;
}

} // namespace detail

/// Deterministic initialization: weights uniform in +-1/sqrt(in_dim), bias zero.
inline TrimodalAligner init_aligner(std::uint64_t seed, const AlignerConfig& config = {}) {
    if (!(config.tau > 0.0)) {
        throw parameter_error("temperature must be positive, got " + std::to_string(config.tau));
    }
    TrimodalAligner aligner;
    aligner.visual = detail::init_head(seed, 0, config.visual_dim, config.shared_dim, config.bias_enabled);
    aligner.audio = detail::init_head(seed, 1, config.audio_dim, config.shared_dim, config.bias_enabled);
    aligner.text = detail::init_head(seed, 2, config.text_dim, config.shared_dim, config.bias_enabled);
    aligner.tau = config.tau;
    return aligner;
}

/// Rows of x pushed through the head (x * W + b), one output row per input row.
inline Matrix project_rows(const ProjectionHead& head, const Matrix& x) {
    if (x.cols() != head.in_dim()) {
        throw shape_error("projection expects " + std::to_string(head.in_dim()) +
                          " input columns, got " + x.shape());
    }
    Matrix out = matmul(x, head.weight);
    if (head.bias_enabled) {
        for (std::size_t r = 0; r < out.rows(); ++r) {
            auto row = out.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) {
                row[c] += head.bias[c];
            }
        }
    }
    return out;
}

struct Embedding {
    Vector unit;         // normalized pooled projection, zero if degenerate
    double norm = 0.0;   // norm of the pooled projection before normalization
    bool degenerate = false;
};

/// project -> pool over rows -> L2 normalize.
inline Embedding embed_modality_detailed(const ProjectionHead& head, const Matrix& x) {
    if (x.rows() == 0) {
        throw empty_input_error("embed_modality: input has no rows");
    }
    const Vector pooled = mean_pool_rows(project_rows(head, x));
    auto normalized = l2_normalize_rows_detailed(Matrix::from_row(pooled));
    return Embedding{normalized.values.values(), normalized.norms[0], normalized.degenerate[0]};
}

inline Vector embed_modality(const ProjectionHead& head, const Matrix& x) {
    return embed_modality_detailed(head, x).unit;
}

} // namespace trimodal
