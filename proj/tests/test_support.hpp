#pragma once

// Helpers shared by the unit tests: tiny datasets, random inputs and an
// independent finite-difference routine.

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "trimodal/trimodal.hpp"

namespace trimodal::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) {
        v = scale * rng.normal();
    }
    return m;
}

inline Matrix random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m = random_matrix(rng, rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double ss = 0.0;
        for (double v : m.row(r)) ss += v * v;
        const double n = std::sqrt(ss);
        for (double& v : m.row(r)) v /= n;
    }
    return m;
}

/// Every clip gets audio/visual features with `rows` rows and one caption of
/// each type (or `captions` of each).
inline Dataset toy_dataset(std::uint64_t seed, std::size_t clips, DatasetDims dims, std::size_t rows = 2,
                           std::size_t captions = 1) {
    Rng rng(seed);
    Dataset ds;
    ds.dims = dims;
    for (std::size_t i = 0; i < clips; ++i) {
        Clip c;
        c.id = "clip" + std::to_string(i);
        c.audio = random_matrix(rng, rows, dims.audio_dim);
        c.visual = random_matrix(rng, rows, dims.visual_dim);
        for (CaptionType t : all_caption_types) {
            for (std::size_t k = 0; k < captions; ++k) {
                Vector v(dims.text_dim);
                for (double& x : v) x = static_cast<double>(static_cast<float>(rng.normal()));
                c.captions_of(t).push_back(std::move(v));
            }
        }
        for (double& x : c.audio.data()) x = static_cast<double>(static_cast<float>(x));
        for (double& x : c.visual.data()) x = static_cast<double>(static_cast<float>(x));
        ds.clips.push_back(std::move(c));
    }
    return ds;
}

/// Central differences, written separately from the library's gradcheck.
inline std::vector<double> numeric_gradient(std::span<double> x, const std::function<double()>& f,
                                            double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = f();
        x[i] = keep - h;
        const double fm = f();
        x[i] = keep;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double max_rel_error(std::span<const double> analytic, std::span<const double> numeric) {
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        scale = std::max(scale, std::abs(numeric[i]));
    }
    return diff / std::max(scale, 1e-8);
}

/// InfoNCE straight from the definition (no max subtraction), for small logits.
inline double naive_info_nce(const Matrix& logits) {
    const std::size_t n = logits.rows();
    double rows = 0.0;
    double cols = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double zr = 0.0;
        double zc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            zr += std::exp(logits(i, j));
            zc += std::exp(logits(j, i));
        }
        rows += -std::log(std::exp(logits(i, i)) / zr);
        cols += -std::log(std::exp(logits(i, i)) / zc);
    }
    return 0.5 * (rows / n + cols / n);
}

/// Fresh empty directory under the system temp dir, named after the test.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("trimodal_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) { return detail::read_file(p); }

} // namespace trimodal::testing
