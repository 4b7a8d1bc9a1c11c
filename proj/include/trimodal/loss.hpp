#pragma once

// Symmetric InfoNCE over a batch of paired unit embeddings, its analytic
// gradient, and the per-regime composition of pairwise terms.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "trimodal/matrix.hpp"
#include "trimodal/model.hpp"
#include "trimodal/regime.hpp"

namespace trimodal {

/// Aligned minibatch of embedded (pooled, normalized) modalities. Row i of each
/// matrix belongs to clip_ids[i].
struct TriBatch {
    std::vector<std::string> clip_ids;
    Matrix audio;
    Matrix visual;
    Matrix text;
    CaptionType caption_type = CaptionType::audio_visual;

    std::size_t size() const noexcept { return clip_ids.size(); }

    const Matrix& modality(Modality m) const noexcept {
        return m == Modality::audio ? audio : m == Modality::visual ? visual : text;
    }
};

struct PairLoss {
    double value = 0.0;
    Matrix grad_a;
    Matrix grad_b;
};

struct RegimeLoss {
    double total = 0.0;
    std::optional<PairLoss> av;
    std::optional<PairLoss> at;
    std::optional<PairLoss> vt;

    std::optional<PairLoss>& component(Pair p) noexcept { return p == Pair::av ? av : p == Pair::at ? at : vt; }
    const std::optional<PairLoss>& component(Pair p) const noexcept {
        return p == Pair::av ? av : p == Pair::at ? at : vt;
    }
    std::vector<Pair> present() const {
        std::vector<Pair> out;
        for (Pair p : all_pairs) {
            if (component(p)) {
                out.push_back(p);
            }
        }
        return out;
    }
};

namespace detail {

inline void check_pair_inputs(const Matrix& a, const Matrix& b, double tau) {
    if (a.rows() == 0 || b.rows() == 0) {
        throw empty_input_error("contrastive loss needs a non-empty batch");
    }
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw shape_error("paired embeddings must share a shape, got " + a.shape() + " and " + b.shape());
    }
    if (!(tau > 0.0)) {
        throw parameter_error("temperature must be positive, got " + std::to_string(tau));
    }
}

/// Row-wise softmax with max subtraction; also returns log-sum-exp per row.
inline Matrix softmax_rows(const Matrix& logits, std::vector<double>& lse) {
    Matrix p(logits.rows(), logits.cols());
    lse.assign(logits.rows(), 0.0);
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            p(i, j) = std::exp(row[j] - mx);
            sum += p(i, j);
        }
        for (std::size_t j = 0; j < row.size(); ++j) {
            p(i, j) /= sum;
        }
        lse[i] = mx + std::log(sum);
    }
    return p;
}

inline Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            t(j, i) = m(i, j);
        }
    }
    return t;
}

struct InfoNceParts {
    double value = 0.0;
    Matrix dlogits; // d value / d logits
};

inline InfoNceParts info_nce_parts(const Matrix& logits) {
    if (logits.rows() != logits.cols()) {
        throw shape_error("info_nce expects a square logit matrix, got " + logits.shape());
    }
    if (logits.rows() == 0) {
        throw empty_input_error("info_nce: empty logit matrix");
    }
    const std::size_t n = logits.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<double> lse_row;
    std::vector<double> lse_col;
    const Matrix p_row = softmax_rows(logits, lse_row);
    const Matrix p_col_t = softmax_rows(transpose(logits), lse_col);

    double row_loss = 0.0;
    double col_loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        row_loss += lse_row[i] - logits(i, i);
        col_loss += lse_col[i] - logits(i, i);
    }
    InfoNceParts out;
    // Each term is a cross-entropy and hence >= 0; clamp rounding noise.
    out.value = std::max(0.0, 0.5 * (row_loss * inv_n + col_loss * inv_n));
    out.dlogits = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double delta = i == j ? 1.0 : 0.0;
            out.dlogits(i, j) = 0.5 * inv_n * ((p_row(i, j) - delta) + (p_col_t(j, i) - delta));
        }
    }
    return out;
}

} // namespace detail

/// logits[i][j] = a_i . b_j / tau
inline Matrix similarity_logits(const Matrix& a, const Matrix& b, double tau) {
    detail::check_pair_inputs(a, b, tau);
    Matrix logits = matmul_transpose_b(a, b);
    const double inv_tau = 1.0 / tau;
    for (double& v : logits.data()) {
        v *= inv_tau;
    }
    return logits;
}

/// Symmetric cross-entropy with the diagonal as positives, averaged over the
/// row (a -> b) and column (b -> a) directions.
inline double info_nce(const Matrix& logits) { return detail::info_nce_parts(logits).value; }

inline PairLoss info_nce_grad(const Matrix& a, const Matrix& b, double tau) {
    auto parts = detail::info_nce_parts(similarity_logits(a, b, tau));
    for (double& g : parts.dlogits.data()) {
        g /= tau;
    }
    PairLoss out;
    out.value = parts.value;
    out.grad_a = matmul(parts.dlogits, b);
    out.grad_b = matmul_transpose_a(parts.dlogits, a);
    return out;
}

/// Composes the pairwise terms the regime prescribes for this batch. Terms are
/// summed in the order av, at, vt.
inline RegimeLoss regime_loss(const TriBatch& batch, const TrimodalAligner& aligner, const Phase& phase) {
    RegimeLoss out;
    for (Pair p : active_pairs(phase, batch.caption_type)) {
        auto term = info_nce_grad(batch.modality(first_modality(p)), batch.modality(second_modality(p)),
                                  aligner.tau);
        out.total += term.value;
        out.component(p) = std::move(term);
    }
    return out;
}

inline RegimeLoss regime_loss(const TriBatch& batch, const TrimodalAligner& aligner, Regime regime) {
    return regime_loss(batch, aligner, Phase{regime, 1});
}

} // namespace trimodal
