#include <doctest.h>

#include <cmath>
#include <numeric>

#include "motorattn/inference.hpp"
#include "motorattn/synth.hpp"
#include "test_support.hpp"

using namespace motorattn;
using namespace motorattn::inference;

namespace {

synth::SceneConfig small_scene() {
    synth::SceneConfig cfg;
    cfg.height = 32;
    cfg.width = 32;
    cfg.num_frames_observed = 8;
    cfg.num_frames_future = 4;
    return cfg;
}

model::ModelConfig clip_sized_model() {
    model::ModelConfig cfg;
    cfg.frames = 8;
    cfg.height = 32;
    cfg.width = 32;
    cfg.channels = {4, 4, 6, 6, 8};
    cfg.strides = {{{2, 2, 2}, {1, 2, 2}, {1, 2, 2}, {1, 2, 2}, {1, 1, 1}}};
    cfg.motor_grid = {4, 8, 8};
    cfg.hotspot_grid = {4, 4};
    return cfg;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Gives the classifier non-zero weights so predictions depend on the input.
model::ModelParams trained_looking(const model::ModelConfig& cfg, std::uint64_t seed) {
    auto p = model::ModelParams::initialize(cfg, seed);
    Rng rng(seed + 1);
    for (int i = 0; i < p.classifier_w.size(); ++i) p.classifier_w.data()[i] = rng.normal();
    return p;
}

}  // namespace

TEST_CASE("prediction is deterministic, leaves parameters untouched and returns distributions") {
    const auto cfg = clip_sized_model();
    const auto params = trained_looking(cfg, 3);
    const std::string before = params.checksum();
    const synth::VideoClip clip = synth::generate_clip(small_scene(), 21);

    const Prediction a = predict(cfg, params, clip);
    const Prediction b = predict(cfg, params, clip);
    CHECK(params.checksum() == before);
    CHECK(a.action_probs == b.action_probs);
    CHECK(a.motor.probs == b.motor.probs);
    CHECK(a.hotspot.probs == b.hotspot.probs);

    CHECK(a.action_probs.size() == static_cast<std::size_t>(cfg.num_actions));
    CHECK(sum(a.action_probs) == doctest::Approx(1.0));
    CHECK(sum(a.hotspot.probs) == doctest::Approx(1.0));
    CHECK(a.hotspot.grid == cfg.hotspot_grid);
    CHECK(a.motor.grid == cfg.motor_grid);
    for (int t = 0; t < cfg.motor_grid.t; ++t) CHECK(sum(a.motor.slice(t).probs) == doctest::Approx(1.0));

    // Same as the forward pass on the noise-free path.
    const auto pass = model::forward(cfg, params, model::clip_to_tensor(clip), model::SamplingNoise::deterministic());
    CHECK(pass.action_probs == a.action_probs);

    const model::Model m(cfg, params);
    CHECK(predict(m, clip).action_probs == a.action_probs);
}

TEST_CASE("sampled prediction is a seeded distribution") {
    const auto cfg = clip_sized_model();
    const auto params = trained_looking(cfg, 4);
    const synth::VideoClip clip = synth::generate_clip(small_scene(), 22);
    model::GumbelConfig g;
    g.rng_seed = 9;
    const auto a = predict_sampled(cfg, params, clip, 5, g);
    const auto b = predict_sampled(cfg, params, clip, 5, g);
    CHECK(a == b);
    CHECK(sum(a) == doctest::Approx(1.0));
}

TEST_CASE("window offsets") {
    CHECK(window_offsets(16, 4, 1, true) == std::vector<int>{6});
    CHECK(window_offsets(16, 4, 1, false) == std::vector<int>{12});
    CHECK(window_offsets(16, 4, 3, false) == std::vector<int>{0, 6, 12});
    CHECK(window_offsets(10, 4, 4, true) == std::vector<int>{0, 2, 4, 6});
    CHECK(window_offsets(4, 4, 2, true) == std::vector<int>{0, 0});
    CHECK_THROWS_AS(window_offsets(3, 4, 1, true), Error);
    CHECK_THROWS_AS(window_offsets(8, 4, 0, true), Error);
}

TEST_CASE("crop copies the requested window") {
    const auto cfg = testsupport::tiny_config();
    const synth::VideoClip clip = synth::generate_clip(small_scene(), 5);
    const Tensor4 x = crop(clip, cfg, 3, 7, 11);
    for (int t = 0; t < cfg.frames; ++t) {
        for (int r = 0; r < cfg.height; r += 5) {
            for (int c = 0; c < cfg.width; c += 3) {
                for (int ch = 0; ch < 3; ++ch) CHECK(x.at(ch, t, r, c) == clip.pixel(3 + t, 7 + r, 11 + c, ch));
            }
        }
    }
    CHECK_THROWS_AS(crop(clip, cfg, 5, 0, 0), Error);
    CHECK_THROWS_AS(crop(clip, cfg, 0, 17, 0), Error);
}

TEST_CASE("multi-clip prediction averages the window predictions") {
    const auto cfg = testsupport::tiny_config();
    auto params = model::ModelParams::initialize(cfg, 6);
    Rng rng(7);
    for (int i = 0; i < params.classifier_w.size(); ++i) params.classifier_w.data()[i] = rng.normal();
    const synth::VideoClip video = synth::generate_clip(small_scene(), 8);  // 8 frames of 32 x 32

    // One window: the centred crop ending at the last observable frame.
    const auto single = predict_multiclip(cfg, params, video, 1, 1);
    const auto direct = predict(cfg, params, crop(video, cfg, 4, 8, 8)).action_probs;
    for (std::size_t i = 0; i < direct.size(); ++i) CHECK(single[i] == doctest::Approx(direct[i]).epsilon(1e-12));

    std::vector<double> expected(static_cast<std::size_t>(cfg.num_actions), 0.0);
    for (int t0 : {0, 2, 4}) {
        for (int x0 : {0, 16}) {
            const auto p = predict(cfg, params, crop(video, cfg, t0, 8, x0)).action_probs;
            for (std::size_t i = 0; i < expected.size(); ++i) expected[i] += p[i] / 6.0;
        }
    }
    const auto multi = predict_multiclip(cfg, params, video, 2, 3);
    REQUIRE(multi.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(multi[i] == doctest::Approx(expected[i]).epsilon(1e-12));

    synth::VideoClip shorter = video;
    shorter.frames_count = 3;
    shorter.frames.resize(std::size_t{3} * 32 * 32 * 3);
    const std::string msg = [&] {
        try {
            predict_multiclip(cfg, params, shorter, 1, 1);
        } catch (const Error& e) {
            return std::string(e.what());
        }
        return std::string();
    }();
    CHECK(msg.find("insufficient frames") != std::string::npos);
}
