#pragma once

// The six training regimes and what each one trains, feeds and optimizes.
//
//   regime               stage  trainable heads          captions        objective
//   two-stage (either)   1      visual, text             visual          vt
//   two-stage frozen     2      audio                    audio           at
//   two-stage trainable  2      audio, text              audio           at
//   audioclip            1      all                      audio           av + at + vt
//   slava-mixed          1      all                      audio | visual  av + (at | vt)
//   slava-av-2loss       1      all                      audio-visual    at + vt
//   slava-av-3loss       1      all                      audio-visual    av + at + vt

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trimodal/error.hpp"
#include "trimodal/model.hpp"

namespace trimodal {

enum class CaptionType { audio, visual, audio_visual };

inline constexpr std::array<CaptionType, 3> all_caption_types{
    CaptionType::audio, CaptionType::visual, CaptionType::audio_visual};

inline std::string_view to_string(CaptionType t) {
    switch (t) {
    case CaptionType::audio: return "audio";
    case CaptionType::visual: return "visual";
    case CaptionType::audio_visual: return "audio_visual";
    }
    return "?";
}

inline std::optional<CaptionType> parse_caption_type(std::string_view s) {
    for (CaptionType t : all_caption_types) {
        if (s == to_string(t)) {
            return t;
        }
    }
    return std::nullopt;
}

enum class Regime {
    two_stage_frozen,
    two_stage_trainable,
    audioclip,
    slava_mixed,
    slava_av_2loss,
    slava_av_3loss,
};

inline constexpr std::array<Regime, 6> all_regimes{
    Regime::two_stage_frozen, Regime::two_stage_trainable, Regime::audioclip,
    Regime::slava_mixed,      Regime::slava_av_2loss,      Regime::slava_av_3loss};

inline std::string_view to_string(Regime r) {
    switch (r) {
    case Regime::two_stage_frozen: return "two-stage-frozen";
    case Regime::two_stage_trainable: return "two-stage-trainable";
    case Regime::audioclip: return "audioclip";
    case Regime::slava_mixed: return "slava-mixed";
    case Regime::slava_av_2loss: return "slava-av-2loss";
    case Regime::slava_av_3loss: return "slava-av-3loss";
    }
    return "?";
}

inline std::optional<Regime> parse_regime(std::string_view s) {
    for (Regime r : all_regimes) {
        if (s == to_string(r)) {
            return r;
        }
    }
    return std::nullopt;
}

inline bool is_two_stage(Regime r) noexcept {
    return r == Regime::two_stage_frozen || r == Regime::two_stage_trainable;
}

inline int stage_count(Regime r) noexcept { return is_two_stage(r) ? 2 : 1; }

/// One contrastive term. The first named modality plays the "a" role.
enum class Pair { av, at, vt };

inline constexpr std::array<Pair, 3> all_pairs{Pair::av, Pair::at, Pair::vt};

inline std::string_view to_string(Pair p) {
    switch (p) {
    case Pair::av: return "av";
    case Pair::at: return "at";
    case Pair::vt: return "vt";
    }
    return "?";
}

inline Modality first_modality(Pair p) noexcept {
    return p == Pair::vt ? Modality::visual : Modality::audio;
}
inline Modality second_modality(Pair p) noexcept {
    return p == Pair::av ? Modality::visual : Modality::text;
}

/// A point in a regime's schedule: the regime plus the 1-based stage.
struct Phase {
    Regime regime = Regime::slava_av_3loss;
    int stage = 1;
};

inline void check_phase(const Phase& phase) {
    if (phase.stage < 1 || phase.stage > stage_count(phase.regime)) {
        throw parameter_error("regime " + std::string(to_string(phase.regime)) + " has no stage " +
                              std::to_string(phase.stage));
    }
}

/// Caption types a phase can draw batches from.
inline std::vector<CaptionType> caption_types_for(const Phase& phase) {
    check_phase(phase);
    switch (phase.regime) {
    case Regime::two_stage_frozen:
    case Regime::two_stage_trainable:
        return {phase.stage == 1 ? CaptionType::visual : CaptionType::audio};
    case Regime::audioclip: return {CaptionType::audio};
    case Regime::slava_mixed: return {CaptionType::audio, CaptionType::visual};
    case Regime::slava_av_2loss:
    case Regime::slava_av_3loss: return {CaptionType::audio_visual};
    }
    return {};
}

inline bool is_trainable(const Phase& phase, Modality m) {
    check_phase(phase);
    if (!is_two_stage(phase.regime)) {
        return true;
    }
    if (phase.stage == 1) {
        return m != Modality::audio;
    }
    if (m == Modality::audio) {
        return true;
    }
    return m == Modality::text && phase.regime == Regime::two_stage_trainable;
}

/// The contrastive terms active for a batch of the given caption type, in the
/// fixed summation order av, at, vt.
inline std::vector<Pair> active_pairs(const Phase& phase, CaptionType caption_type) {
    const auto allowed = caption_types_for(phase);
    bool ok = false;
    for (CaptionType t : allowed) {
        ok = ok || t == caption_type;
    }
    if (!ok) {
        throw data_mismatch_error("regime " + std::string(to_string(phase.regime)) + " stage " +
                                  std::to_string(phase.stage) + " cannot use " +
                                  std::string(to_string(caption_type)) + " captions");
    }
    switch (phase.regime) {
    case Regime::two_stage_frozen:
    case Regime::two_stage_trainable:
        return {phase.stage == 1 ? Pair::vt : Pair::at};
    case Regime::audioclip:
    case Regime::slava_av_3loss: return {Pair::av, Pair::at, Pair::vt};
    case Regime::slava_mixed:
        return {Pair::av, caption_type == CaptionType::audio ? Pair::at : Pair::vt};
    case Regime::slava_av_2loss: return {Pair::at, Pair::vt};
    }
    return {};
}

} // namespace trimodal
