#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace trimodal {
namespace {

const DatasetDims dims8{8, 8, 8};

TrimodalAligner small_aligner(std::uint64_t seed, bool bias) {
    AlignerConfig cfg;
    cfg.audio_dim = cfg.visual_dim = cfg.text_dim = 8;
    cfg.shared_dim = 8;
    cfg.bias_enabled = bias;
    cfg.tau = 0.1;
    TrimodalAligner a = init_aligner(seed, cfg);
    if (bias) {
        Rng rng(seed + 1);
        for (Modality m : all_modalities) {
            for (double& v : a.head(m).bias) v = rng.uniform(-0.1, 0.1);
        }
    }
    return a;
}

BatchPlan first_four(CaptionType type) {
    BatchPlan plan;
    plan.caption_type = type;
    plan.clips = {0, 1, 2, 3};
    plan.caption_choice = {0, 0, 0, 0};
    return plan;
}

TEST(BatchGradients, MatchFiniteDifferencesThroughTheWholePipeline) {
    const Dataset ds = testing::toy_dataset(1, 4, dims8, 3, 1);
    struct Case {
        Phase phase;
        CaptionType type;
    };
    const std::vector<Case> cases{
        {{Regime::slava_av_3loss, 1}, CaptionType::audio_visual},
        {{Regime::slava_av_2loss, 1}, CaptionType::audio_visual},
        {{Regime::slava_mixed, 1}, CaptionType::visual},
        {{Regime::audioclip, 1}, CaptionType::audio},
        {{Regime::two_stage_trainable, 2}, CaptionType::audio},
    };
    for (bool bias : {false, true}) {
        for (const auto& c : cases) {
            TrimodalAligner aligner = small_aligner(7, bias);
            const BatchPlan plan = first_four(c.type);
            const BatchGradients g = batch_gradients(aligner, ds, plan, c.phase);
            auto f = [&] { return regime_loss(embed_batch(aligner, ds, plan).batch, aligner, c.phase).total; };
            EXPECT_EQ(g.loss.total, f());
            const auto involved = modalities_in(active_pairs(c.phase, c.type));
            for (Modality m : all_modalities) {
                const auto& head_grad = g.heads[static_cast<std::size_t>(m)];
                ASSERT_EQ(head_grad.has_value(), involved[static_cast<std::size_t>(m)]) << to_string(m);
                if (!head_grad) continue;
                ProjectionHead& head = aligner.head(m);
                EXPECT_LT(testing::max_rel_error(head_grad->weight.data(),
                                                 testing::numeric_gradient(head.weight.data(), f)),
                          1e-4);
                if (bias) {
                    EXPECT_LT(testing::max_rel_error(head_grad->bias, testing::numeric_gradient(head.bias, f)), 1e-4);
                }
            }
        }
    }
}

TEST(BatchGradients, OnlyTrainableHeadsGetGradients) {
    const Dataset ds = testing::toy_dataset(2, 4, dims8, 2, 1);
    TrimodalAligner aligner = small_aligner(3, false);
    const BatchGradients stage1 =
        batch_gradients(aligner, ds, first_four(CaptionType::visual), Phase{Regime::two_stage_frozen, 1});
    EXPECT_FALSE(stage1.heads[static_cast<std::size_t>(Modality::audio)]);
    EXPECT_TRUE(stage1.heads[static_cast<std::size_t>(Modality::visual)]);
    EXPECT_TRUE(stage1.heads[static_cast<std::size_t>(Modality::text)]);
    for (Modality m : all_modalities) aligner.head(m).trainable = is_trainable(Phase{Regime::two_stage_frozen, 2}, m);
    const BatchGradients stage2 =
        batch_gradients(aligner, ds, first_four(CaptionType::audio), Phase{Regime::two_stage_frozen, 2});
    EXPECT_TRUE(stage2.heads[static_cast<std::size_t>(Modality::audio)]);
    EXPECT_FALSE(stage2.heads[static_cast<std::size_t>(Modality::visual)]);
    EXPECT_FALSE(stage2.heads[static_cast<std::size_t>(Modality::text)]);
}

TEST(TrainStep, FrozenHeadsAreBitUnchanged) {
    const Dataset ds = testing::toy_dataset(3, 4, dims8, 2, 1);
    TrimodalAligner aligner = small_aligner(4, true);
    for (Modality m : all_modalities) aligner.head(m).trainable = false;
    const TrimodalAligner before = aligner;
    OptimizerStates states = OptimizerStates::for_aligner(aligner);
    AdamWConfig optim;
    optim.lr = 0.1;
    for (int i = 0; i < 5; ++i) {
        train_step(aligner, ds, first_four(CaptionType::audio_visual), Phase{Regime::slava_av_3loss, 1}, states, optim);
    }
    EXPECT_EQ(aligner, before);

    TrimodalAligner two = small_aligner(4, true);
    for (Modality m : all_modalities) two.head(m).trainable = is_trainable(Phase{Regime::two_stage_frozen, 2}, m);
    const TrimodalAligner two_before = two;
    OptimizerStates s2 = OptimizerStates::for_aligner(two);
    train_step(two, ds, first_four(CaptionType::audio), Phase{Regime::two_stage_frozen, 2}, s2, optim);
    EXPECT_EQ(two.text, two_before.text);
    EXPECT_EQ(two.visual, two_before.visual);
    EXPECT_NE(two.audio.weight, two_before.audio.weight);
}

TEST(TrainStep, NonFiniteFeaturesRaiseDivergenceNamingTheClips) {
    Dataset ds = testing::toy_dataset(5, 4, dims8, 2, 1);
    ds.clips[2].audio(0, 0) = std::numeric_limits<double>::infinity();
    TrimodalAligner aligner = small_aligner(6, false);
    OptimizerStates states = OptimizerStates::for_aligner(aligner);
    try {
        train_step(aligner, ds, first_four(CaptionType::audio_visual), Phase{Regime::slava_av_3loss, 1}, states,
                   AdamWConfig{});
        FAIL();
    } catch (const divergence_error& e) {
        EXPECT_NE(std::string(e.what()).find("clip2"), std::string::npos) << e.what();
    }
}

TrainConfig quick_config(std::size_t epochs = 3) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 8;
    cfg.lr = 1e-3;
    cfg.seed = 9;
    return cfg;
}

Dataset small_synthetic(std::size_t clips = 48, std::uint64_t split = 0) {
    SyntheticConfig s;
    s.n_clips = clips;
    s.split = split;
    s.rows_per_clip = 2;
    s.dims = {16, 16, 12};
    return gen_synthetic(s);
}

TEST(Training, TwoStageFrozenKeepsStageOneTextHead) {
    const Dataset ds = small_synthetic();
    const TrainConfig cfg = quick_config();
    TrainResult stage1;
    stage1.regime = Regime::two_stage_frozen;
    stage1.aligner = init_aligner(cfg.seed, aligner_config_for(ds.dims, cfg));
    const TrimodalAligner init = stage1.aligner;
    run_stage(stage1, ds, Phase{Regime::two_stage_frozen, 1}, cfg, nullptr);
    // Stage 1 never touches the audio head.
    EXPECT_EQ(stage1.aligner.audio, init.audio);
    EXPECT_NE(stage1.aligner.text, init.text);

    const TrainResult full = train_two_stage(ds, cfg, true);
    EXPECT_EQ(full.aligner.text, stage1.aligner.text);
    EXPECT_EQ(full.aligner.visual, stage1.aligner.visual);
    EXPECT_NE(full.aligner.audio, stage1.aligner.audio);

    const TrainResult trainable = train_two_stage(ds, cfg, false);
    EXPECT_NE(trainable.aligner.text, stage1.aligner.text);
    EXPECT_EQ(trainable.aligner.visual, stage1.aligner.visual);
}

TEST(Training, LossDecreasesOnSyntheticData) {
    const Dataset ds = small_synthetic(64);
    for (Regime r : all_regimes) {
        const TrainResult result = train_regime(ds, quick_config(6), r);
        const int last_stage = stage_count(r);
        const auto means = result.stage_means(last_stage);
        ASSERT_EQ(means.size(), 6u);
        EXPECT_LT(means.back(), means.front()) << to_string(r);
    }
}

TEST(Training, TwoLossTraceHasExactlyAtAndVt) {
    const TrainResult result = train_regime(small_synthetic(), quick_config(2), Regime::slava_av_2loss);
    ASSERT_FALSE(result.trace.empty());
    for (const auto& row : result.trace) {
        EXPECT_FALSE(row.components[static_cast<std::size_t>(Pair::av)]);
        ASSERT_TRUE(row.components[static_cast<std::size_t>(Pair::at)]);
        ASSERT_TRUE(row.components[static_cast<std::size_t>(Pair::vt)]);
        EXPECT_EQ(row.total, *row.components[1] + *row.components[2]);
    }
}

TEST(Training, MixedRegimeIsDeterministicAndUsesBothCaptionTypes) {
    const Dataset ds = small_synthetic();
    const TrainResult a = train_regime(ds, quick_config(), Regime::slava_mixed);
    const TrainResult b = train_regime(ds, quick_config(), Regime::slava_mixed);
    EXPECT_EQ(a.aligner, b.aligner);
    EXPECT_EQ(loss_trace_csv(a), loss_trace_csv(b));
    std::set<CaptionType> types;
    for (const auto& row : a.trace) types.insert(row.caption_type);
    EXPECT_EQ(types.size(), 2u);
}

TEST(Training, ValidationSelectsTheBestEpoch) {
    const Dataset train = small_synthetic(48, 0);
    const Dataset val = small_synthetic(24, 1);
    const TrainResult r = train_regime(train, quick_config(4), Regime::slava_av_3loss, &val);
    ASSERT_TRUE(r.selected_epoch[0]);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    for (const auto& e : r.epochs) {
        ASSERT_TRUE(e.validation_total);
        if (*e.validation_total < best) {
            best = *e.validation_total;
            best_epoch = e.epoch;
        }
    }
    EXPECT_EQ(*r.selected_epoch[0], best_epoch);
    EXPECT_EQ(evaluate_loss(r.aligner, val, Phase{Regime::slava_av_3loss, 1}, quick_config(4)), best);
}

TEST(Training, RejectsBadConfigsAndMissingCaptions) {
    const Dataset ds = small_synthetic(8);
    TrainConfig bad = quick_config();
    bad.epochs = 0;
    EXPECT_THROW(train_regime(ds, bad, Regime::audioclip), parameter_error);
    bad = quick_config();
    bad.tau = 0.0;
    EXPECT_THROW(train_regime(ds, bad, Regime::audioclip), parameter_error);
    Dataset no_av = ds;
    for (auto& c : no_av.clips) c.captions_of(CaptionType::audio_visual).clear();
    EXPECT_THROW(train_regime(no_av, quick_config(), Regime::slava_av_3loss), data_mismatch_error);
    EXPECT_NO_THROW(train_regime(no_av, quick_config(1), Regime::slava_mixed));
}

TEST(TrainConfig, HashCoversEveryField) {
    const TrainConfig base;
    std::set<std::uint64_t> hashes{base.config_hash()};
    TrainConfig c = base;
    c.lr = 2e-5;
    hashes.insert(c.config_hash());
    c = base;
    c.seed = 1;
    hashes.insert(c.config_hash());
    c = base;
    c.bias_enabled = true;
    hashes.insert(c.config_hash());
    c = base;
    c.batch_size = 16;
    hashes.insert(c.config_hash());
    EXPECT_EQ(hashes.size(), 5u);
    EXPECT_EQ(base.config_hash(), TrainConfig{}.config_hash());
}

TEST(Checkpoint, RoundTripAtFloat32Precision) {
    TrimodalAligner a = small_aligner(10, true);
    a.visual.weight(0, 0) = 0.1; // not representable in f32
    const std::string bytes = encode_checkpoint(a, "slava-av-3loss", 0xabcdef);
    const Checkpoint ck = decode_checkpoint(bytes);
    EXPECT_EQ(ck.regime_tag, "slava-av-3loss");
    EXPECT_EQ(ck.config_hash, 0xabcdefu);
    EXPECT_EQ(ck.aligner.tau, a.tau);
    EXPECT_EQ(ck.aligner.visual.weight(0, 0), static_cast<double>(0.1f));
    EXPECT_EQ(ck.aligner.text.weight, a.text.weight); // init weights are already f32
    EXPECT_TRUE(ck.aligner.audio.bias_enabled);
    EXPECT_EQ(encode_checkpoint(ck.aligner, "slava-av-3loss", 0xabcdef), bytes);
}

TEST(Checkpoint, SaveLoadIsByteStable) {
    const auto dir = testing::scratch_dir("ckpt");
    const TrainResult r = train_regime(small_synthetic(16), quick_config(1), Regime::audioclip);
    save_checkpoint(r.aligner, dir / "a.ckpt", "audioclip", 1);
    save_checkpoint(load_checkpoint(dir / "a.ckpt").aligner, dir / "b.ckpt", "audioclip", 1);
    EXPECT_EQ(testing::slurp(dir / "a.ckpt"), testing::slurp(dir / "b.ckpt"));
}

TEST(Checkpoint, RejectsCorruptInput) {
    const std::string good = encode_checkpoint(small_aligner(11, false), "x", 0);
    std::string wrong_version = good;
    wrong_version[4] = 2;
    try {
        decode_checkpoint(wrong_version);
        FAIL();
    } catch (const format_error& e) {
        EXPECT_NE(std::string(e.what()).find("format_version 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(decode_checkpoint("XXXX" + good.substr(4)), format_error);
    EXPECT_THROW(decode_checkpoint(good.substr(0, good.size() - 3)), format_error);
    EXPECT_THROW(decode_checkpoint(good + "z"), format_error);
    EXPECT_THROW(decode_checkpoint(""), format_error);
}

} // namespace
} // namespace trimodal
