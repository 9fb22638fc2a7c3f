#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "motorattn/layers.hpp"
#include "motorattn/model.hpp"
#include "motorattn/training.hpp"
#include "test_support.hpp"

using namespace motorattn;
using namespace motorattn::model;
using testsupport::random_tensor;
using testsupport::relative_error;
using testsupport::tiny_config;

namespace {

double slice_sum(std::span<const double> v, std::size_t off, std::size_t n) {
    return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(off), v.begin() + static_cast<std::ptrdiff_t>(off + n), 0.0);
}

ModelParams randomized(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams p = ModelParams::initialize(cfg, seed);
    Rng rng(seed + 99);
    // Non-trivial norm affine terms and biases so that every gradient path is exercised.
    p.for_each([&](const std::string& name, Eigen::MatrixXd& m) {
        if (name.ends_with(".bias") || name.ends_with(".beta")) {
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-0.3, 0.3);
        }
        if (name.ends_with(".gamma")) {
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(0.6, 1.4);
        }
    });
    return p;
}

}  // namespace

TEST_CASE("default backbone produces the documented pyramid shapes") {
    const ModelConfig cfg;
    cfg.validate();
    const auto grids = cfg.block_grids();
    // Strides (2,2,2), (2,2,2), (1,2,2), (1,2,2), (1,1,1) on 16x64x64.
    CHECK(grids[0] == Grid3{8, 32, 32});
    CHECK(grids[1] == Grid3{4, 16, 16});
    CHECK(grids[2] == Grid3{4, 8, 8});
    CHECK(grids[3] == Grid3{4, 4, 4});
    CHECK(grids[4] == Grid3{4, 4, 4});

    Rng rng(1);
    const Tensor4 x = random_tensor(3, 16, 64, 64, rng, 0.0, 1.0);
    const auto params = ModelParams::initialize(cfg, 3);
    const auto f = backbone_forward(cfg, params, x);
    CHECK(f[1].channels() == 16);
    CHECK(f[1].grid() == Grid3{4, 16, 16});
    CHECK(f[2].channels() == 32);
    CHECK(f[2].grid() == Grid3{4, 8, 8});
    CHECK(f[4].channels() == 64);
    CHECK(f[4].grid() == Grid3{4, 4, 4});
    for (const auto& phi : f.phi) {
        for (double v : phi.values()) REQUIRE(std::isfinite(v));
    }
}

TEST_CASE("backbone is linear at zero and deterministic") {
    const ModelConfig cfg = tiny_config();
    ModelParams params = ModelParams::initialize(cfg, 5);
    const Tensor4 zero(3, cfg.frames, cfg.height, cfg.width);
    for (const auto& phi : backbone_forward(cfg, params, zero).phi) {
        for (double v : phi.values()) CHECK(v == 0.0);
    }
    Rng rng(2);
    const Tensor4 x = random_tensor(3, cfg.frames, cfg.height, cfg.width, rng);
    const auto a = backbone_forward(cfg, params, x);
    const auto b = backbone_forward(cfg, params, x);
    for (int i = 0; i < kBlocks; ++i) CHECK(a[i].values() == b[i].values());
}

TEST_CASE("backbone rejects inputs of the wrong shape") {
    const ModelConfig cfg = tiny_config();
    const auto params = ModelParams::initialize(cfg, 1);
    CHECK_THROWS_WITH_AS(backbone_forward(cfg, params, Tensor4(3, cfg.frames, 8, 8)),
                         doctest::Contains("input shape mismatch"), Error);
}

TEST_CASE("config validation catches unreachable pooling grids") {
    ModelConfig cfg = tiny_config();
    cfg.motor_grid = {4, 6, 6};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = tiny_config();
    cfg.strides[4] = {1, 2, 2};  // phi5 becomes 4x1x1; still divides, fine
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("motor head normalization") {
    const ModelConfig cfg = tiny_config();
    Rng rng(3);
    const Tensor4 phi2 = random_tensor(cfg.channels[1], 4, 8, 8, rng);
    const auto g = cfg.motor_geometry();

    SUBCASE("zero weights give uniform psi and M") {
        const auto vol = motor_head(phi2, Eigen::MatrixXd::Zero(1, g.patch_size()), Eigen::MatrixXd::Zero(1, 1), g,
                                    cfg.motor_grid);
        for (double v : vol.psi) CHECK(v == doctest::Approx(1.0 / 256).epsilon(1e-12));
        for (double v : vol.probs) CHECK(v == doctest::Approx(1.0 / 64).epsilon(1e-12));
    }

    SUBCASE("M is psi renormalized per slice") {
        Eigen::MatrixXd w(1, g.patch_size());
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal(0.0, 0.5);
        const Eigen::MatrixXd b = Eigen::MatrixXd::Constant(1, 1, 0.3);
        const auto vol = motor_head(phi2, w, b, g, cfg.motor_grid);
        double psi_total = 0.0;
        for (double v : vol.psi) psi_total += v;
        CHECK(psi_total == doctest::Approx(1.0).epsilon(1e-12));
        const std::size_t n = 64;
        for (std::size_t t = 0; t < 4; ++t) {
            const double s = slice_sum(vol.psi, t * n, n);
            CHECK(slice_sum(vol.probs, t * n, n) == doctest::Approx(1.0).epsilon(1e-6));
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(vol.probs[t * n + i] == doctest::Approx(vol.psi[t * n + i] / s).epsilon(1e-10));
                CHECK(vol.probs[t * n + i] > 0.0);
            }
        }
    }

    SUBCASE("argmax per slice is invariant to positive logit scaling") {
        Eigen::MatrixXd w(1, g.patch_size());
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal(0.0, 0.5);
        const Eigen::MatrixXd b = Eigen::MatrixXd::Zero(1, 1);
        const auto a = motor_head(phi2, w, b, g, cfg.motor_grid);
        const auto s = motor_head(phi2, 3.7 * w, b, g, cfg.motor_grid);
        for (int t = 0; t < 4; ++t) {
            const auto sa = a.slice(t).probs, ss = s.slice(t).probs;
            CHECK(std::max_element(sa.begin(), sa.end()) - sa.begin() == std::max_element(ss.begin(), ss.end()) - ss.begin());
        }
    }
}

TEST_CASE("Gumbel sampling") {
    Rng rng(11);
    AttentionVolume vol(Grid3{2, 3, 3});
    vol.psi = testsupport::random_distribution(18, rng);
    double s0 = 0.0, s1 = 0.0;
    for (int i = 0; i < 9; ++i) s0 += vol.psi[static_cast<std::size_t>(i)];
    for (int i = 9; i < 18; ++i) s1 += vol.psi[static_cast<std::size_t>(i)];
    for (int i = 0; i < 18; ++i) vol.probs[static_cast<std::size_t>(i)] = vol.psi[static_cast<std::size_t>(i)] / (i < 9 ? s0 : s1);

    SUBCASE("noise off at unit temperature reproduces M") {
        GumbelConfig g{1.0, false, 0};
        const auto m = gumbel_sample(vol, g, rng);
        for (std::size_t i = 0; i < 18; ++i) CHECK(std::abs(m.probs[i] - vol.probs[i]) <= 1e-12);
    }

    SUBCASE("zero-temperature limit is one-hot at the perturbed argmax") {
        const auto noise = draw_gumbel_noise(18, rng);
        const auto m = gumbel_sample(vol, 1e-6, noise);
        for (int t = 0; t < 2; ++t) {
            int best = 0;
            for (int i = 1; i < 9; ++i) {
                const auto k = static_cast<std::size_t>(t * 9 + i), kb = static_cast<std::size_t>(t * 9 + best);
                if (std::log(vol.psi[k]) + noise[k] > std::log(vol.psi[kb]) + noise[kb]) best = i;
            }
            for (int i = 0; i < 9; ++i) CHECK(m.probs[static_cast<std::size_t>(t * 9 + i)] == doctest::Approx(i == best ? 1.0 : 0.0));
        }
    }

    SUBCASE("non-positive temperature is rejected") {
        CHECK_THROWS_AS(gumbel_sample(vol, GumbelConfig{0.0, true, 0}, rng), Error);
        CHECK_THROWS_AS(hotspot_sample(vol.slice(0), GumbelConfig{-1.0, true, 0}, rng), Error);
    }

    SUBCASE("samples are distributions") {
        for (int rep = 0; rep < 50; ++rep) {
            const auto m = gumbel_sample(vol, GumbelConfig{2.0, true, 0}, rng);
            CHECK(slice_sum(m.probs, 0, 9) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(slice_sum(m.probs, 9, 9) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("Gumbel sample mean agrees with an independent Monte-Carlo oracle") {
    constexpr int kSamples = 20000;
    Rng rng(12);
    HotspotMap a(Grid2{2, 3});
    a.probs = testsupport::random_distribution(6, rng);
    const double theta = 2.0;

    std::vector<double> mean(6, 0.0), sq(6, 0.0), omean(6, 0.0), osq(6, 0.0);
    for (int s = 0; s < kSamples; ++s) {
        const auto m = hotspot_sample(a, GumbelConfig{theta, true, 0}, rng);
        for (std::size_t i = 0; i < 6; ++i) {
            mean[i] += m.probs[i];
            sq[i] += m.probs[i] * m.probs[i];
        }
    }
    // Oracle: Gumbel noise as -log(E), E ~ Exp(1), from an unrelated generator.
    std::mt19937 gen(777);
    std::exponential_distribution<double> expo(1.0);
    for (int s = 0; s < kSamples; ++s) {
        double z[6], mx = -1e300, tot = 0.0;
        for (int i = 0; i < 6; ++i) {
            z[i] = (std::log(a.probs[static_cast<std::size_t>(i)]) - std::log(expo(gen))) / theta;
            mx = std::max(mx, z[i]);
        }
        for (double& v : z) tot += (v = std::exp(v - mx));
        for (std::size_t i = 0; i < 6; ++i) {
            const double p = z[i] / tot;
            omean[i] += p;
            osq[i] += p * p;
        }
    }
    for (std::size_t i = 0; i < 6; ++i) {
        const double m1 = mean[i] / kSamples, m2 = omean[i] / kSamples;
        const double v1 = sq[i] / kSamples - m1 * m1, v2 = osq[i] / kSamples - m2 * m2;
        const double se = std::sqrt(v1 / kSamples + v2 / kSamples);
        CHECK(std::abs(m1 - m2) <= 3.0 * se);
    }
}

TEST_CASE("attention pooling") {
    SUBCASE("same grid is the identity") {
        Rng rng(4);
        AttentionVolume v(Grid3{2, 4, 4});
        for (double& p : v.probs) p = rng.uniform();
        CHECK(pool_attention(v, v.grid).probs == v.probs);
    }
    SUBCASE("one-hot lands in its quadrant") {
        HotspotMap m(Grid2{4, 4});
        m.at(3, 1) = 1.0;
        const auto p = pool_attention(m, Grid2{2, 2});
        CHECK(p.probs == std::vector<double>{0.0, 0.0, 1.0, 0.0});
    }
    SUBCASE("matches brute-force window max") {
        Rng rng(5);
        AttentionVolume v(Grid3{4, 16, 16});
        for (double& p : v.probs) p = rng.uniform();
        const auto p = pool_attention(v, Grid3{4, 8, 8});
        for (int t = 0; t < 4; ++t) {
            for (int r = 0; r < 8; ++r) {
                for (int c = 0; c < 8; ++c) {
                    const double expect = std::max({v.at(t, 2 * r, 2 * c), v.at(t, 2 * r + 1, 2 * c), v.at(t, 2 * r, 2 * c + 1),
                                                    v.at(t, 2 * r + 1, 2 * c + 1)});
                    CHECK(p.at(t, r, c) == expect);
                }
            }
        }
    }
    SUBCASE("non-divisible grids are rejected") {
        AttentionVolume v(Grid3{4, 16, 16});
        CHECK_THROWS_AS(pool_attention(v, Grid3{4, 5, 5}), Error);
    }
}

TEST_CASE("hotspot head") {
    const ModelConfig cfg = tiny_config();
    const auto g = cfg.hotspot_geometry();
    Rng rng(6);
    const Tensor4 phi3 = random_tensor(cfg.channels[2], 4, 4, 4, rng);

    SUBCASE("uniform motor sample and zero weights give uniform A") {
        const AttentionVolume m(Grid3{4, 4, 4}, 1.0 / 16);
        const auto a = hotspot_head(phi3, m, Eigen::MatrixXd::Zero(1, g.patch_size()), Eigen::MatrixXd::Zero(1, 1), g);
        for (double v : a.probs) CHECK(v == doctest::Approx(1.0 / 16));
    }

    Eigen::MatrixXd w(1, g.patch_size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal(0.0, 1.0);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Constant(1, 1, -0.2);

    SUBCASE("output is a distribution") {
        AttentionVolume m(Grid3{4, 4, 4});
        for (double& v : m.probs) v = rng.uniform();
        const auto a = hotspot_head(phi3, m, w, b, g, 16.0);
        CHECK(std::accumulate(a.probs.begin(), a.probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    }

    SUBCASE("one-hot motor sample isolates a single cell of phi3") {
        AttentionVolume m(Grid3{4, 4, 4});
        m.at(2, 1, 3) = 1.0;
        const auto a = hotspot_head(phi3, m, w, b, g);
        Tensor4 perturbed = phi3;
        for (int c = 0; c < perturbed.channels(); ++c) {
            for (int t = 0; t < 4; ++t) {
                for (int r = 0; r < 4; ++r) {
                    for (int x = 0; x < 4; ++x) {
                        if (!(t == 2 && r == 1 && x == 3)) perturbed.at(c, t, r, x) += rng.uniform(-5.0, 5.0);
                    }
                }
            }
        }
        const auto a2 = hotspot_head(perturbed, m, w, b, g);
        for (std::size_t i = 0; i < a.probs.size(); ++i) CHECK(a.probs[i] == a2.probs[i]);
        // A change at the selected cell does move the output.
        perturbed.at(0, 2, 1, 3) += 1.0;
        CHECK(hotspot_head(perturbed, m, w, b, g).probs != a.probs);
    }

    SUBCASE("grid mismatch is rejected") {
        const AttentionVolume m(Grid3{4, 2, 2}, 0.25);
        CHECK_THROWS_AS(hotspot_head(phi3, m, w, b, g), Error);
    }
}

TEST_CASE("anticipation head") {
    SUBCASE("zero classifier gives a uniform distribution") {
        Rng rng(7);
        const Tensor4 phi5 = random_tensor(4, 2, 2, 2, rng);
        const AttentionVolume m(Grid3{2, 2, 2}, 0.25);
        const HotspotMap a(Grid2{2, 2}, 0.25);
        const auto p = anticipation_head(phi5, m, a, Eigen::MatrixXd::Zero(5, 4), Eigen::MatrixXd::Zero(5, 1));
        REQUIRE(p.size() == 5);
        for (double v : p) CHECK(v == doctest::Approx(0.2));
    }

    SUBCASE("hand-computed 2x2x2 single-channel instance") {
        Tensor4 phi5(1, 2, 2, 2);
        const double f[8] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
        std::copy(f, f + 8, phi5.data());
        AttentionVolume m(Grid3{2, 2, 2});
        m.probs = {0.1, 0.2, 0.3, 0.4, 0.4, 0.3, 0.2, 0.1};
        HotspotMap a(Grid2{2, 2});
        a.probs = {0.5, 0.25, 0.125, 0.125};
        Eigen::MatrixXd w(2, 1);
        w << 0.7, -1.1;
        Eigen::MatrixXd b(2, 1);
        b << 0.05, -0.02;
        // avg(M*phi5) = (0.1+0.4+0.9+1.6+2.0+1.8+1.4+0.8)/8 = 9.0/8
        // avg(A*phi5[last]) = (2.5+1.5+0.875+1.0)/4 = 5.875/4
        const double pooled = 9.0 / 8 + 5.875 / 4;
        const double l0 = 0.7 * pooled + 0.05, l1 = -1.1 * pooled - 0.02;
        const double p0 = 1.0 / (1.0 + std::exp(l1 - l0));
        const auto p = anticipation_head(phi5, m, a, w, b);
        CHECK(p[0] == doctest::Approx(p0).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(1.0 - p0).epsilon(1e-12));
    }

    SUBCASE("class-count mismatch is rejected") {
        const Tensor4 phi5(3, 2, 2, 2);
        const AttentionVolume m(Grid3{2, 2, 2}, 0.25);
        const HotspotMap a(Grid2{2, 2}, 0.25);
        CHECK_THROWS_AS(anticipation_head(phi5, m, a, Eigen::MatrixXd::Zero(2, 4), Eigen::MatrixXd::Zero(2, 1)), Error);
    }
}

TEST_CASE("full forward pass agrees with the head functions composed by hand") {
    ModelConfig cfg = tiny_config();
    cfg.normalize_attention = true;
    ModelParams params = randomized(cfg, 21);
    params.feature_center.setZero();
    Rng rng(22);
    const Tensor4 x = random_tensor(3, cfg.frames, cfg.height, cfg.width, rng);
    const SamplingNoise noise = SamplingNoise::draw(cfg, GumbelConfig{2.0, true, 0}, rng);
    const auto pass = forward(cfg, params, x, noise);

    const auto feats = backbone_forward(cfg, params, x);
    const auto m = motor_head(feats[1], params.motor_w, params.motor_b, cfg.motor_geometry(), cfg.motor_grid);
    for (std::size_t i = 0; i < m.probs.size(); ++i) CHECK(pass.motor.probs[i] == doctest::Approx(m.probs[i]).epsilon(1e-12));
    const auto ms = gumbel_sample(m, 2.0, noise.motor);
    const auto a = hotspot_head(feats[2], pool_attention(ms, feats[2].grid()), params.hotspot_w, params.hotspot_b,
                                cfg.hotspot_geometry(), true);
    for (std::size_t i = 0; i < a.probs.size(); ++i) CHECK(pass.hotspot.probs[i] == doctest::Approx(a.probs[i]).epsilon(1e-10));
    const auto as = hotspot_sample(a, 2.0, noise.hotspot);
    const auto p = anticipation_head(feats[4], pool_attention(ms, feats[4].grid()),
                                     pool_attention(as, Grid2{feats[4].height(), feats[4].width()}), params.classifier_w,
                                     params.classifier_b, true);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(pass.action_probs[i] == doctest::Approx(p[i]).epsilon(1e-10));
}

TEST_CASE("noise-free unit-temperature sampling is the deterministic path") {
    const ModelConfig cfg = tiny_config();
    const ModelParams params = randomized(cfg, 31);
    Rng rng(32);
    const Tensor4 x = random_tensor(3, cfg.frames, cfg.height, cfg.width, rng);
    const auto det = forward(cfg, params, x, SamplingNoise::deterministic());
    SamplingNoise zeros;
    zeros.temperature = 1.0;
    zeros.motor.assign(static_cast<std::size_t>(cfg.motor_grid.cells()), 0.0);
    zeros.hotspot.assign(static_cast<std::size_t>(cfg.hotspot_grid.cells()), 0.0);
    const auto sto = forward(cfg, params, x, zeros);
    CHECK(det.action_probs == sto.action_probs);
    CHECK(det.hotspot.probs == sto.hotspot.probs);
    CHECK(det.motor_sample == sto.motor_sample);
    for (std::size_t i = 0; i < det.motor_sample.size(); ++i) CHECK(std::abs(det.motor_sample[i] - det.motor.probs[i]) <= 1e-12);
}

namespace {

struct Fixture {
    ModelConfig cfg;
    ModelParams params;
    Tensor4 x;
    SamplingNoise noise;
    AttentionVolume q_motor;
    HotspotMap q_hotspot;
    int label = 1;

    double objective(const ModelParams& p) const {
        const auto pass = forward(cfg, p, x, noise);
        return training::loss(pass.action_probs, label, pass.motor, q_motor, pass.hotspot, q_hotspot, 0.7, 1.3).total;
    }

    ModelParams analytic() const {
        const auto pass = forward(cfg, params, x, noise);
        ModelParams g = ModelParams::zeros(cfg);
        backward(cfg, params, pass, training::loss_gradients(pass, label, q_motor, q_hotspot, 0.7, 1.3), g);
        return g;
    }
};

Fixture make_fixture(std::uint64_t seed, bool scale) {
    Fixture f;
    f.cfg = tiny_config();
    f.cfg.normalize_attention = scale;
    f.params = randomized(f.cfg, seed);
    Rng rng(seed * 7 + 1);
    f.x = random_tensor(3, f.cfg.frames, f.cfg.height, f.cfg.width, rng);
    f.noise = SamplingNoise::draw(f.cfg, GumbelConfig{2.0, true, 0}, rng);
    f.q_motor = AttentionVolume(f.cfg.motor_grid);
    for (int t = 0; t < f.cfg.motor_grid.t; ++t) {
        const auto d = testsupport::random_distribution(64, rng);
        std::copy(d.begin(), d.end(), f.q_motor.probs.begin() + t * 64);
    }
    f.q_hotspot = HotspotMap(f.cfg.hotspot_grid);
    f.q_hotspot.probs = testsupport::random_distribution(16, rng);
    f.label = static_cast<int>(rng.index(3));
    return f;
}

}  // namespace

TEST_CASE("analytic parameter gradients match central differences") {
    constexpr double kStep = 1e-4;
    int checked = 0, kinks = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const Fixture f = make_fixture(seed, seed % 2 == 0);
        const ModelParams g = f.analytic();
        std::vector<std::pair<std::string, const Eigen::MatrixXd*>> grads;
        g.for_each([&](const std::string& name, const Eigen::MatrixXd& m) { grads.emplace_back(name, &m); });
        ModelParams probe = f.params;
        std::size_t k = 0;
        Rng pick(seed);
        probe.for_each([&](const std::string& name, Eigen::MatrixXd& m) {
            const Eigen::MatrixXd& gm = *grads[k++].second;
            if (ModelParams::is_buffer(name)) return;
            for (int rep = 0; rep < 3; ++rep) {
                const auto i = static_cast<Eigen::Index>(pick.index(static_cast<std::size_t>(m.size())));
                const double orig = m.data()[i];
                const double mid = f.objective(probe);
                m.data()[i] = orig + kStep;
                const double up = f.objective(probe);
                m.data()[i] = orig - kStep;
                const double down = f.objective(probe);
                m.data()[i] = orig;
                // A ReLU or max-pool switch inside the interval shows up as unequal one-sided slopes.
                if (relative_error((up - mid) / kStep, (mid - down) / kStep) > 1e-2) {
                    ++kinks;
                    continue;
                }
                const double numeric = (up - down) / (2 * kStep);
                INFO(name << "[" << i << "] analytic=" << gm.data()[i] << " numeric=" << numeric);
                CHECK(relative_error(gm.data()[i], numeric) < 1e-4);
                ++checked;
            }
        });
    }
    CHECK(checked > 100);
    CHECK(kinks * 20 < checked);
}

TEST_CASE("Gumbel backward with respect to psi matches central differences") {
    Rng rng(41);
    for (int rep = 0; rep < 20; ++rep) {
        AttentionVolume vol(Grid3{2, 3, 3});
        vol.psi = testsupport::random_distribution(18, rng);
        const auto noise = draw_gumbel_noise(18, rng);
        std::vector<double> c(18);
        for (double& v : c) v = rng.normal();
        const double theta = rng.uniform(0.5, 3.0);
        auto objective = [&](const AttentionVolume& v) {
            const auto s = gumbel_sample(v, theta, noise);
            return std::inner_product(c.begin(), c.end(), s.probs.begin(), 0.0);
        };
        const auto sample = gumbel_sample(vol, theta, noise);
        const auto grad = gumbel_sample_backward_psi(vol, sample, c, theta);
        for (std::size_t i = 0; i < 18; ++i) {
            AttentionVolume up = vol, down = vol;
            up.psi[i] += 1e-4 * vol.psi[i];
            down.psi[i] -= 1e-4 * vol.psi[i];
            const double numeric = (objective(up) - objective(down)) / (2e-4 * vol.psi[i]);
            CHECK(relative_error(grad[i], numeric) < 1e-4);
        }
    }
}

TEST_CASE("distribution invariants hold on random evaluations") {
    const ModelConfig cfg = tiny_config(5);
    Rng rng(51);
    for (int rep = 0; rep < 20; ++rep) {
        const ModelParams params = randomized(cfg, 100 + static_cast<std::uint64_t>(rep));
        const Tensor4 x = random_tensor(3, cfg.frames, cfg.height, cfg.width, rng);
        const auto pass = forward(cfg, params, x, SamplingNoise::draw(cfg, GumbelConfig{2.0, true, 0}, rng));
        for (int t = 0; t < 4; ++t) {
            CHECK(slice_sum(pass.motor.probs, static_cast<std::size_t>(t) * 64, 64) == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(slice_sum(pass.motor_sample, static_cast<std::size_t>(t) * 64, 64) == doctest::Approx(1.0).epsilon(1e-9));
        }
        CHECK(slice_sum(pass.hotspot.probs, 0, 16) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(slice_sum(pass.hotspot_sample, 0, 16) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(slice_sum(pass.action_probs, 0, 5) == doctest::Approx(1.0).epsilon(1e-9));
        for (double v : pass.action_probs) CHECK(v >= 0.0);
    }
}

TEST_CASE("parameter containers") {
    const ModelConfig cfg = tiny_config();
    const auto a = ModelParams::initialize(cfg, 1);
    const auto b = ModelParams::initialize(cfg, 1);
    const auto c = ModelParams::initialize(cfg, 2);
    CHECK(a == b);
    CHECK(a.checksum() == b.checksum());
    CHECK_FALSE(a == c);
    CHECK(a.checksum() != c.checksum());
    CHECK(a.all_finite());
    CHECK(a.classifier_w.rows() == cfg.num_actions);
    CHECK_THROWS_AS(Model(cfg, ModelParams::zeros(tiny_config(4))), Error);
}

TEST_CASE("slice normalization rescales each slice to mean one") {
    const std::vector<double> w{1, 3, 0.5, 0.5, 2, 0};
    const auto out = model::normalize_slices(w, 2);
    const std::vector<double> expected{2.0 / 3.0, 2.0, 1.0 / 3.0, 0.6, 2.4, 0.0};
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(out[i] == doctest::Approx(expected[i]));
    CHECK_THROWS_AS(model::normalize_slices(std::vector<double>{0, 0, 1, 1}, 2), Error);
    CHECK_THROWS_AS(model::normalize_slices(w, 4), Error);
    const std::vector<double> bad{std::nan(""), 1.0};
    CHECK(std::isnan(model::normalize_slices(bad, 1)[1]));
}
