#include "motorattn/inference.hpp"

#include <cmath>

namespace motorattn::inference {

Prediction predict(const model::ModelConfig& cfg, const model::ModelParams& params, const Tensor4& x) {
    const auto pass = model::forward(cfg, params, x, model::SamplingNoise::deterministic());
    return {pass.action_probs, pass.motor, pass.hotspot};
}

Prediction predict(const model::ModelConfig& cfg, const model::ModelParams& params, const synth::VideoClip& clip) {
    return predict(cfg, params, model::clip_to_tensor(clip));
}

Prediction predict(const model::Model& m, const synth::VideoClip& clip) { return predict(m.config(), m.params(), clip); }

std::vector<double> predict_sampled(const model::ModelConfig& cfg, const model::ModelParams& params,
                                    const synth::VideoClip& clip, int samples, const model::GumbelConfig& gumbel) {
    if (samples < 1) throw Error("predict_sampled: samples must be >= 1");
    const Tensor4 x = model::clip_to_tensor(clip);
    Rng rng = Rng::stream(gumbel.rng_seed, 0x5a3b1eULL, 0);
    std::vector<double> mean(static_cast<std::size_t>(cfg.num_actions), 0.0);
    for (int s = 0; s < samples; ++s) {
        const auto pass = model::forward(cfg, params, x, model::SamplingNoise::draw(cfg, gumbel, rng));
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += pass.action_probs[i] / samples;
    }
    return mean;
}

Tensor4 crop(const synth::VideoClip& video, const model::ModelConfig& cfg, int t0, int y0, int x0) {
    if (video.channels != cfg.in_channels) throw Error("crop: channel mismatch");
    if (t0 < 0 || y0 < 0 || x0 < 0 || t0 + cfg.frames > video.frames_count || y0 + cfg.height > video.height ||
        x0 + cfg.width > video.width) {
        throw Error("crop: window exceeds the video");
    }
    Tensor4 x(cfg.in_channels, cfg.frames, cfg.height, cfg.width);
    for (int t = 0; t < cfg.frames; ++t) {
        for (int r = 0; r < cfg.height; ++r) {
            for (int c = 0; c < cfg.width; ++c) {
                for (int ch = 0; ch < cfg.in_channels; ++ch) x.at(ch, t, r, c) = video.pixel(t0 + t, y0 + r, x0 + c, ch);
            }
        }
    }
    return x;
}

std::vector<int> window_offsets(int extent, int window, int n, bool centre_single) {
    if (n < 1) throw Error("window count must be >= 1");
    const int slack = extent - window;
    if (slack < 0) throw Error("video is smaller than one model window");
    std::vector<int> out;
    if (n == 1) {
        out.push_back(centre_single ? slack / 2 : slack);
        return out;
    }
    for (int k = 0; k < n; ++k) out.push_back(static_cast<int>(std::lround(static_cast<double>(k) * slack / (n - 1))));
    return out;
}

std::vector<double> predict_multiclip(const model::ModelConfig& cfg, const model::ModelParams& params,
                                      const synth::VideoClip& video, int n_spatial, int n_temporal) {
    if (video.frames_count < cfg.frames) {
        throw Error("insufficient frames: video has " + std::to_string(video.frames_count) + ", model needs " +
                    std::to_string(cfg.frames));
    }
    if (video.height < cfg.height || video.width < cfg.width) throw Error("video is smaller than one model window");
    const auto times = window_offsets(video.frames_count, cfg.frames, n_temporal, false);
    const auto xs = window_offsets(video.width, cfg.width, n_spatial, true);
    const int y0 = (video.height - cfg.height) / 2;
    std::vector<double> mean(static_cast<std::size_t>(cfg.num_actions), 0.0);
    for (int t0 : times) {
        for (int x0 : xs) {
            const auto p = predict(cfg, params, crop(video, cfg, t0, y0, x0));
            for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += p.action_probs[i];
        }
    }
    double total = 0.0;
    for (double v : mean) total += v;
    for (double& v : mean) v /= total;
    return mean;
}

}  // namespace motorattn::inference
