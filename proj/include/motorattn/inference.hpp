#pragma once

#include <vector>

#include "motorattn/model.hpp"
#include "motorattn/synth.hpp"

namespace motorattn::inference {

struct Prediction {
    std::vector<double> action_probs;
    AttentionVolume motor;  ///< M (psi kept alongside)
    HotspotMap hotspot;     ///< A
};

/// Deterministic prediction: expectations in place of samples (noise off, unit temperature).
Prediction predict(const model::ModelConfig& cfg, const model::ModelParams& params, const Tensor4& x);
Prediction predict(const model::ModelConfig& cfg, const model::ModelParams& params, const synth::VideoClip& clip);
Prediction predict(const model::Model& m, const synth::VideoClip& clip);

/// Monte-Carlo average of `samples` stochastic passes, kept for comparison against `predict`.
std::vector<double> predict_sampled(const model::ModelConfig& cfg, const model::ModelParams& params,
                                    const synth::VideoClip& clip, int samples, const model::GumbelConfig& gumbel);

/// Frame-aligned window of `video`: frames [t0, t0 + cfg.frames), columns [x0, x0 + cfg.width),
/// rows [y0, y0 + cfg.height).
Tensor4 crop(const synth::VideoClip& video, const model::ModelConfig& cfg, int t0, int y0, int x0);

/// Evenly spaced offsets of `n` windows of length `window` inside `extent`. A single window is
/// centred when `centre_single` and otherwise placed at the end.
std::vector<int> window_offsets(int extent, int window, int n, bool centre_single);

/// Averages `predict` over n_spatial horizontal crops x n_temporal windows. A single temporal
/// window ends at the last observable frame.
std::vector<double> predict_multiclip(const model::ModelConfig& cfg, const model::ModelParams& params,
                                      const synth::VideoClip& video, int n_spatial, int n_temporal);

}  // namespace motorattn::inference
