// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance <work-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>

#include "cli_app.hpp"
#include "trimodal/gradcheck.hpp"
#include "trimodal/trimodal.hpp"

namespace fs = std::filesystem;
using namespace trimodal;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name << ": " << detail << std::endl;
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), f, a, b, c, d);
    return buf;
}

void gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    GradcheckOptions opt;
    opt.trials = 100;
    const GradcheckSummary s = run_gradcheck(opt);
    const double dt = seconds_since(t0);
    report(s.max_rel_error() < 1e-4 && dt < 5.0, "gradient correctness",
           fmt("100 instances, max rel err info_nce %.2e end-to-end %.2e, %.2f s", s.max_rel_error_info_nce,
               s.max_rel_error_end_to_end, dt));
}

void loss_anchors() {
    double worst = 0.0;
    for (std::size_t b : {2u, 4u, 32u}) {
        worst = std::max(worst, std::abs(info_nce(Matrix(b, b, 0.25)) - std::log(static_cast<double>(b))));
    }
    const double single = info_nce_grad(Matrix{{0.6, 0.8}}, Matrix{{0.0, 1.0}}, 0.07).value;
    const double identity =
        info_nce(similarity_logits(Matrix::identity(2), Matrix::identity(2), 1.0)) - std::log1p(std::exp(-1.0));
    worst = std::max(worst, std::abs(identity));
    report(worst <= 1e-9 && single == 0.0, "closed-form loss anchors",
           fmt("max |err| %.2e over ln B (B=2,4,32) and ln(1+e^-1); B=1 loss %.1f", worst, single));
}

struct Recalls {
    double visual_from_visual_captions;
    double visual_from_audio_captions;
    double visual_from_audio;
};

void regime_ordering(const fs::path& work) {
    SyntheticConfig syn; // 512 clips, k_s=8, k_a=k_v=4, noise 0.1, seed 0
    const Dataset train = gen_synthetic(syn);
    syn.split = 1;
    syn.n_clips = 128;
    const Dataset validation = gen_synthetic(syn);
    syn.split = 2;
    syn.n_clips = 512;
    const Dataset test = gen_synthetic(syn);

    const TrainConfig cfg; // 20 epochs, defaults
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<RetrievalReport> reports;
    std::array<Recalls, 6> r{};
    for (std::size_t i = 0; i < all_regimes.size(); ++i) {
        const TrainResult result = train_regime(train, cfg, all_regimes[i], &validation);
        SuiteOptions opts;
        opts.model_tag = std::string(to_string(all_regimes[i]));
        reports.push_back(run_task_suite(result.aligner, test, opts));
        r[i] = {*reports.back().rows[0].recall, *reports.back().rows[1].recall, *reports.back().rows[6].recall};
    }
    const double dt = seconds_since(t0);
    std::vector<const RetrievalReport*> ptrs;
    for (const auto& rep : reports) ptrs.push_back(&rep);
    const std::string table = format_table(ptrs);
    cli::write_text(work / "regimes.txt", table);
    std::cout << table;

    auto idx = [](Regime g) {
        return static_cast<std::size_t>(std::find(all_regimes.begin(), all_regimes.end(), g) - all_regimes.begin());
    };
    const double frozen = r[idx(Regime::two_stage_frozen)].visual_from_audio;
    const double three = r[idx(Regime::slava_av_3loss)].visual_from_audio;
    const double two = r[idx(Regime::slava_av_2loss)].visual_from_audio;
    const double mixed = r[idx(Regime::slava_mixed)].visual_from_audio;
    report(three >= 1.5 * frozen && mixed >= 1.5 * frozen, "regime ordering (a) joint audio-visual vs two-stage",
           fmt("visual<-audio R@10: 3-loss %.4f, mixed %.4f, two-stage frozen %.4f (need >= %.4f)", three, mixed,
               frozen, 1.5 * frozen));
    report(three > two, "regime ordering (b) 3-loss vs 2-loss",
           fmt("visual<-audio R@10: 3-loss %.4f vs 2-loss %.4f", three, two));
    bool all_below = true;
    std::string detail;
    for (std::size_t i = 0; i < r.size(); ++i) {
        all_below = all_below && r[i].visual_from_audio_captions < r[i].visual_from_visual_captions;
        detail += std::string(i ? ", " : "") + std::string(to_string(all_regimes[i])) +
                  fmt(" %.3f<%.3f", r[i].visual_from_audio_captions, r[i].visual_from_visual_captions);
    }
    report(all_below, "regime ordering (c) cross-modal below same-modal", detail);
    report(dt < 300.0, "regime ordering runtime", fmt("six regimes trained and evaluated in %.1f s", dt));
}

std::string head_bytes(const ProjectionHead& h) {
    std::string out(h.weight.size() * sizeof(double) + h.bias.size() * sizeof(double), '\0');
    std::memcpy(out.data(), h.weight.data().data(), h.weight.size() * sizeof(double));
    std::memcpy(out.data() + h.weight.size() * sizeof(double), h.bias.data(), h.bias.size() * sizeof(double));
    return out;
}

void frozen_text() {
    SyntheticConfig syn;
    syn.n_clips = 256;
    const Dataset ds = gen_synthetic(syn);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.lr = 1e-4;
    TrainResult result;
    result.regime = Regime::two_stage_frozen;
    result.aligner = init_aligner(cfg.seed, aligner_config_for(ds.dims, cfg));
    run_stage(result, ds, Phase{Regime::two_stage_frozen, 1}, cfg, nullptr);
    const std::string text_after_1 = head_bytes(result.aligner.text);
    const std::string audio_after_1 = head_bytes(result.aligner.audio);
    run_stage(result, ds, Phase{Regime::two_stage_frozen, 2}, cfg, nullptr);
    const bool audio_moved = head_bytes(result.aligner.audio) != audio_after_1;
    report(head_bytes(result.aligner.text) == text_after_1 && audio_moved, "frozen-text invariant",
           std::string("text head bytes ") + (head_bytes(result.aligner.text) == text_after_1 ? "identical" : "differ") +
               " across stage 2; audio head " + (audio_moved ? "updated" : "NOT updated"));
}

void composition_equivalence() {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t b = 2 + rng.below(31);
        auto unit = [&](std::size_t d) {
            Matrix m(b, d);
            for (double& v : m.data()) v = rng.normal();
            return l2_normalize_rows(m);
        };
        TriBatch batch;
        for (std::size_t i = 0; i < b; ++i) batch.clip_ids.push_back(std::to_string(i));
        batch.audio = unit(64);
        batch.visual = unit(64);
        batch.text = unit(64);
        batch.caption_type = CaptionType::audio;
        TrimodalAligner aligner;
        aligner.tau = rng.uniform(0.03, 1.0);
        const double audioclip = regime_loss(batch, aligner, Regime::audioclip).total;
        batch.caption_type = CaptionType::audio_visual;
        const double three = regime_loss(batch, aligner, Regime::slava_av_3loss).total;
        worst = std::max(worst, std::abs(audioclip - three));
    }
    report(worst <= 1e-12, "regime-composition equivalence",
           fmt("max |audioclip - 3-loss| %.2e over 20 batches", worst));
}

void retrieval_oracle() {
    Rng rng(77);
    std::size_t agree = 0;
    std::size_t total = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(100);
        const std::size_t nq = 1 + rng.below(50);
        const std::size_t d = 1 + rng.below(12);
        Matrix db(n, d);
        Matrix q(nq, d);
        for (double& v : db.data()) v = rng.normal();
        for (double& v : q.data()) v = rng.normal();
        // Coarse values make exact ties common, exercising the tie order.
        if (trial % 2 == 0) {
            for (double& v : db.data()) v = std::round(v);
            for (double& v : q.data()) v = std::round(v);
        }
        std::vector<std::size_t> truth(nq);
        for (auto& t : truth) t = rng.below(n);
        for (std::size_t k : {1u, 5u, 10u}) {
            std::size_t hits = 0;
            for (std::size_t i = 0; i < nq; ++i) {
                std::vector<std::pair<double, std::size_t>> scored;
                for (std::size_t j = 0; j < n; ++j) scored.emplace_back(-dot(q.row(i), db.row(j)), j);
                std::sort(scored.begin(), scored.end());
                for (std::size_t p = 0; p < std::min(k, n); ++p) hits += scored[p].second == truth[i];
            }
            ++total;
            agree += recall_at_k(q, db, truth, k) == static_cast<double>(hits) / static_cast<double>(nq);
        }
    }
    report(agree == total, "retrieval oracle", std::to_string(agree) + "/" + std::to_string(total) +
                                                   " (instance, k) pairs agree exactly with full-sort recall");
}

int cli_run(std::vector<std::string> args) {
    args.insert(args.begin(), "trimodal");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run_command(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

void determinism(const fs::path& work) {
    std::array<std::string, 2> bytes;
    bool ok = true;
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = work / ("determinism_" + std::to_string(run));
        fs::remove_all(dir);
        const std::string data = (dir / "data").string();
        const std::string ckpt = (dir / "model.ckpt").string();
        const std::string rep = (dir / "report.json").string();
        ok = ok && cli_run({"synth", "--out", data, "--clips", "96", "--seed", "3"}) == 0;
        ok = ok && cli_run({"train", "--data", data, "--regime", "slava-mixed", "--out", ckpt, "--epochs", "3",
                            "--batch-size", "16", "--seed", "5"}) == 0;
        ok = ok && cli_run({"eval", "--data", data, "--ckpt", ckpt, "--out", rep}) == 0;
        if (!ok) break;
        bytes[run] = detail::read_file(ckpt) + detail::read_file(rep) + detail::read_file(ckpt + ".loss.csv");
    }
    report(ok && bytes[0] == bytes[1], "determinism",
           ok ? "checkpoint, loss trace and report " + std::string(bytes[0] == bytes[1] ? "byte-identical" : "differ") +
                    " across two synth -> train -> eval runs"
              : "a CLI step failed");
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: acceptance <work-dir>\n";
        return 2;
    }
    const fs::path work = argv[1];
    fs::create_directories(work);
    const std::vector<std::pair<const char*, std::function<void()>>> steps{
        {"gradient correctness", gradient_correctness},
        {"closed-form loss anchors", loss_anchors},
        {"regime ordering", [&] { regime_ordering(work); }},
        {"frozen-text invariant", frozen_text},
        {"regime-composition equivalence", composition_equivalence},
        {"retrieval oracle", retrieval_oracle},
        {"determinism", [&] { determinism(work); }},
    };
    for (const auto& [name, step] : steps) {
        try {
            step();
        } catch (const std::exception& e) {
            report(false, name, std::string("threw: ") + e.what());
        }
    }
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
