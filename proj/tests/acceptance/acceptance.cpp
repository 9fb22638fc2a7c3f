// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.
//
// usage: acceptance [work_dir] [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "motorattn/baselines.hpp"
#include "motorattn/inference.hpp"
#include "motorattn/metrics.hpp"
#include "motorattn/model.hpp"
#include "motorattn/priors.hpp"
#include "motorattn/report.hpp"
#include "motorattn/synth.hpp"
#include "motorattn/training.hpp"

namespace fs = std::filesystem;
using namespace motorattn;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

std::vector<double> random_simplex(std::size_t n, Rng& rng) {
    std::vector<double> p(n);
    double s = 0.0;
    for (double& v : p) s += (v = rng.uniform(0.02, 1.0));
    for (double& v : p) v /= s;
    return p;
}

model::ModelConfig small_model(int num_actions = 4) {
    model::ModelConfig cfg;
    cfg.frames = 4;
    cfg.height = 16;
    cfg.width = 16;
    cfg.channels = {2, 3, 3, 2, 3};
    cfg.strides = {{{1, 2, 2}, {1, 1, 1}, {1, 2, 2}, {1, 2, 2}, {1, 1, 1}}};
    cfg.motor_grid = {4, 8, 8};
    cfg.hotspot_grid = {4, 4};
    cfg.num_actions = num_actions;
    return cfg;
}

// Random parameters with non-trivial biases, norm affine terms and classifier.
model::ModelParams random_params(const model::ModelConfig& cfg, std::uint64_t seed) {
    auto p = model::ModelParams::initialize(cfg, seed);
    Rng rng(seed ^ 0xabcdefULL);
    p.for_each([&](const std::string& name, Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            if (name.ends_with(".bias") || name.ends_with(".beta") || name.ends_with(".center")) m.data()[i] = rng.uniform(-0.3, 0.3);
            if (name.ends_with(".gamma")) m.data()[i] = rng.uniform(0.6, 1.4);
            if (name == "classifier.weight") m.data()[i] = rng.normal();
        }
    });
    return p;
}

Tensor4 random_input(const model::ModelConfig& cfg, Rng& rng) {
    Tensor4 x(cfg.in_channels, cfg.frames, cfg.height, cfg.width);
    for (double& v : x.values()) v = rng.uniform(0.0, 1.0);
    return x;
}

// ---------------------------------------------------------------------------------------------
// 1. Distribution invariants

Outcome distributions() {
    const auto cfg = small_model(6);
    Rng rng(1);
    double worst = 0.0;
    double most_negative = 0.0;
    model::ModelParams params;
    auto check = [&](std::span<const double> v, int slices) {
        const std::size_t n = v.size() / static_cast<std::size_t>(slices);
        for (int s = 0; s < slices; ++s) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = v[s * n + i];
                most_negative = std::min(most_negative, x);
                sum += x;
            }
            worst = std::max(worst, std::abs(sum - 1.0));
        }
    };
    for (int k = 0; k < 1000; ++k) {
        if (k % 50 == 0) params = random_params(cfg, 100 + static_cast<std::uint64_t>(k));
        const Tensor4 x = random_input(cfg, rng);
        const double theta = rng.uniform(0.25, 4.0);
        const auto noise = model::SamplingNoise::draw(cfg, model::GumbelConfig{theta, true, 0}, rng);
        const auto pass = model::forward(cfg, params, x, noise);
        check(pass.motor.probs, cfg.motor_grid.t);
        check(pass.motor_sample, cfg.motor_grid.t);
        check(pass.hotspot.probs, 1);
        check(pass.hotspot_sample, 1);
        check(pass.action_probs, 1);
        check(pass.motor.psi, 1);
    }
    return {worst <= 1e-5 && most_negative >= 0.0,
            fmt("1000 evaluations: max |sum-1| = %.2e, min entry = %.2e", worst, most_negative)};
}

// ---------------------------------------------------------------------------------------------
// 2. Gumbel-Softmax

Outcome gumbel() {
    Rng rng(2);
    const Grid3 grid{3, 3, 4};
    const auto cells = static_cast<std::size_t>(grid.cells());
    const auto per = static_cast<std::size_t>(grid.slice_cells());

    // (a) noise off, unit temperature vs per-slice normalization of psi
    double dev_a = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        AttentionVolume v(grid);
        v.psi = random_simplex(cells, rng);
        const auto s = model::gumbel_sample(v, 1.0, std::span<const double>{});
        for (int t = 0; t < grid.t; ++t) {
            double z = 0.0;
            for (std::size_t i = 0; i < per; ++i) z += v.psi[t * per + i];
            for (std::size_t i = 0; i < per; ++i) dev_a = std::max(dev_a, std::abs(s.probs[t * per + i] - v.psi[t * per + i] / z));
        }
        HotspotMap a(Grid2{4, 4});
        a.probs = random_simplex(16, rng);
        const auto h = model::hotspot_sample(a, 1.0, std::span<const double>{});
        for (std::size_t i = 0; i < 16; ++i) dev_a = std::max(dev_a, std::abs(h.probs[i] - a.probs[i]));
    }

    // (b) vanishing temperature is one-hot at argmax(log psi + G)
    double dev_b = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        AttentionVolume v(grid);
        v.psi = random_simplex(cells, rng);
        const auto noise = model::draw_gumbel_noise(cells, rng);
        const auto s = model::gumbel_sample(v, 1e-6, noise);
        for (int t = 0; t < grid.t; ++t) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < per; ++i) {
                const auto k = t * per + i, kb = t * per + best;
                if (std::log(v.psi[k]) + noise[k] > std::log(v.psi[kb]) + noise[kb]) best = i;
            }
            for (std::size_t i = 0; i < per; ++i) dev_b = std::max(dev_b, std::abs(s.probs[t * per + i] - (i == best ? 1.0 : 0.0)));
        }
    }

    // (c) 20,000-sample mean against an oracle sampler built on an unrelated generator
    constexpr int kSamples = 20000;
    const double theta = 2.0;
    AttentionVolume v(Grid3{2, 2, 3});
    v.psi = random_simplex(12, rng);
    const std::size_t n = 12, slice = 6;
    std::vector<double> m1(n, 0.0), q1(n, 0.0), m2(n, 0.0), q2(n, 0.0);
    Rng sampler(22);
    for (int s = 0; s < kSamples; ++s) {
        const auto out = model::gumbel_sample(v, model::GumbelConfig{theta, true, 0}, sampler);
        for (std::size_t i = 0; i < n; ++i) {
            m1[i] += out.probs[i];
            q1[i] += out.probs[i] * out.probs[i];
        }
    }
    std::mt19937_64 gen(20240611);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int s = 0; s < kSamples; ++s) {
        for (std::size_t t = 0; t < 2; ++t) {
            double z[6], tot = 0.0, mx = -1e300;
            for (std::size_t i = 0; i < slice; ++i) {
                double u = unif(gen);
                while (u <= 0.0) u = unif(gen);
                z[i] = (std::log(v.psi[t * slice + i]) - std::log(-std::log(u))) / theta;
                mx = std::max(mx, z[i]);
            }
            for (double& x : z) tot += (x = std::exp(x - mx));
            for (std::size_t i = 0; i < slice; ++i) {
                const double p = z[i] / tot;
                m2[t * slice + i] += p;
                q2[t * slice + i] += p * p;
            }
        }
    }
    double worst_z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = m1[i] / kSamples, b = m2[i] / kSamples;
        const double va = q1[i] / kSamples - a * a, vb = q2[i] / kSamples - b * b;
        worst_z = std::max(worst_z, std::abs(a - b) / std::sqrt(va / kSamples + vb / kSamples));
    }
    return {dev_a <= 1e-12 && dev_b <= 1e-6 && worst_z <= 3.0,
            fmt("(a) max dev %.2e  (b) max one-hot dev %.2e  (c) max |z| %.2f over %zu cells", dev_a, dev_b, worst_z, n)};
}

// ---------------------------------------------------------------------------------------------
// 3. Gradient checks

Outcome gradients() {
    constexpr double kStep = 1e-4;
    constexpr int kInstances = 20;
    double worst = 0.0;
    int checked = 0, kinks = 0;
    std::string worst_name;
    for (int inst = 0; inst < kInstances; ++inst) {
        const auto cfg = small_model(4);
        const auto params = random_params(cfg, 300 + static_cast<std::uint64_t>(inst));
        Rng rng(400 + static_cast<std::uint64_t>(inst));
        const Tensor4 x = random_input(cfg, rng);
        const double theta = rng.uniform(1.0, 3.0);
        const auto noise = model::SamplingNoise::draw(cfg, model::GumbelConfig{theta, true, 0}, rng);
        AttentionVolume qm(cfg.motor_grid);
        for (int t = 0; t < cfg.motor_grid.t; ++t) {
            const auto d = random_simplex(static_cast<std::size_t>(cfg.motor_grid.slice_cells()), rng);
            std::copy(d.begin(), d.end(), qm.probs.begin() + t * cfg.motor_grid.slice_cells());
        }
        HotspotMap qa(cfg.hotspot_grid);
        qa.probs = random_simplex(static_cast<std::size_t>(cfg.hotspot_grid.cells()), rng);
        const int label = static_cast<int>(rng.index(4));
        const double lm = rng.uniform(0.2, 2.0), la = rng.uniform(0.2, 2.0);

        auto objective = [&](const model::ModelParams& p) {
            const auto pass = model::forward(cfg, p, x, noise);
            return training::loss(pass.action_probs, label, pass.motor, qm, pass.hotspot, qa, lm, la).total;
        };
        const auto pass = model::forward(cfg, params, x, noise);
        auto grads = model::ModelParams::zeros(cfg);
        model::backward(cfg, params, pass, training::loss_gradients(pass, label, qm, qa, lm, la), grads);

        std::vector<const Eigen::MatrixXd*> g;
        grads.for_each([&](const std::string&, const Eigen::MatrixXd& m) { g.push_back(&m); });
        auto probe = params;
        std::size_t k = 0;
        probe.for_each([&](const std::string& name, Eigen::MatrixXd& m) {
            const Eigen::MatrixXd& gm = *g[k++];
            const bool head = name.starts_with("motor.") || name.starts_with("hotspot.") || name == "classifier.weight" ||
                              name == "classifier.bias";
            if (!head) return;
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                const double orig = m.data()[i];
                const double mid = objective(probe);
                m.data()[i] = orig + kStep;
                const double up = objective(probe);
                m.data()[i] = orig - kStep;
                const double down = objective(probe);
                m.data()[i] = orig;
                // A max-pool switch inside the interval makes the one-sided slopes disagree.
                if (rel_err((up - mid) / kStep, (mid - down) / kStep) > 1e-2) {
                    ++kinks;
                    continue;
                }
                const double e = rel_err(gm.data()[i], (up - down) / (2 * kStep));
                if (e > worst) {
                    worst = e;
                    worst_name = name;
                }
                ++checked;
            }
        });

        // Both Gumbel paths in isolation: dL/dpsi through M~ and dL/dA through A~.
        std::vector<double> c(static_cast<std::size_t>(cfg.motor_grid.cells()));
        for (double& v : c) v = rng.normal();
        auto motor_obj = [&](const AttentionVolume& v) {
            const auto s = model::gumbel_sample(v, theta, noise.motor);
            return std::inner_product(c.begin(), c.end(), s.probs.begin(), 0.0);
        };
        const auto ms = model::gumbel_sample(pass.motor, theta, noise.motor);
        const auto gpsi = model::gumbel_sample_backward_psi(pass.motor, ms, c, theta);
        for (std::size_t i = 0; i < c.size(); i += 7) {
            AttentionVolume up = pass.motor, down = pass.motor;
            const double h = kStep * pass.motor.psi[i];
            up.psi[i] += h;
            down.psi[i] -= h;
            const double e = rel_err(gpsi[i], (motor_obj(up) - motor_obj(down)) / (2 * h));
            if (e > worst) {
                worst = e;
                worst_name = "gumbel(psi)";
            }
            ++checked;
        }
        std::vector<double> logits(static_cast<std::size_t>(cfg.hotspot_grid.cells()));
        for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = std::log(pass.hotspot.probs[i]);
        std::vector<double> d(logits.size());
        for (double& v : d) v = rng.normal();
        const auto hs = model::gumbel_softmax(logits, noise.hotspot, 1, theta);
        const auto glog = model::gumbel_softmax_backward(hs, d, 1, theta);
        for (std::size_t i = 0; i < logits.size(); ++i) {
            auto up = logits, down = logits;
            up[i] += kStep;
            down[i] -= kStep;
            const auto su = model::gumbel_softmax(up, noise.hotspot, 1, theta);
            const auto sd = model::gumbel_softmax(down, noise.hotspot, 1, theta);
            const double numeric = (std::inner_product(d.begin(), d.end(), su.begin(), 0.0) -
                                    std::inner_product(d.begin(), d.end(), sd.begin(), 0.0)) /
                                   (2 * kStep);
            const double e = rel_err(glog[i], numeric);
            if (e > worst) {
                worst = e;
                worst_name = "gumbel(A)";
            }
            ++checked;
        }
    }
    return {worst < 1e-4 && kinks * 20 < checked,
            fmt("%d instances, %d coordinates, max rel err %.2e (%s), %d skipped at max-pool switches", kInstances, checked,
                worst, worst_name.c_str(), kinks)};
}

// ---------------------------------------------------------------------------------------------
// 4. Loss decomposition

Outcome loss_terms() {
    Rng rng(4);
    double worst_total = 0.0, worst_zero = 0.0, min_positive = 1e300;
    const auto cfg = small_model(5);
    for (int rep = 0; rep < 100; ++rep) {
        const auto params = random_params(cfg, 500 + static_cast<std::uint64_t>(rep));
        const auto pass = model::forward(cfg, params, random_input(cfg, rng), model::SamplingNoise::deterministic());
        AttentionVolume qm(cfg.motor_grid);
        for (int t = 0; t < cfg.motor_grid.t; ++t) {
            const auto d = random_simplex(64, rng);
            std::copy(d.begin(), d.end(), qm.probs.begin() + t * 64);
        }
        HotspotMap qa(cfg.hotspot_grid);
        qa.probs = random_simplex(16, rng);
        const int y = static_cast<int>(rng.index(5));
        const double lm = rng.uniform(0.0, 3.0), la = rng.uniform(0.0, 3.0);
        const auto t = training::loss(pass.action_probs, y, pass.motor, qm, pass.hotspot, qa, lm, la);

        // Independent sums.
        const double ce = -std::log(pass.action_probs[static_cast<std::size_t>(y)]);
        double kl_a = 0.0;
        for (std::size_t i = 0; i < 16; ++i) kl_a += pass.hotspot.probs[i] * std::log(pass.hotspot.probs[i] / qa.probs[i]);
        double kl_m = 0.0;
        for (std::size_t i = 0; i < qm.probs.size(); ++i) kl_m += pass.motor.probs[i] * std::log(pass.motor.probs[i] / qm.probs[i]);
        kl_m /= cfg.motor_grid.t;
        worst_total = std::max({worst_total, std::abs(t.total - (t.cross_entropy + la * t.kl_hotspot + lm * t.kl_motor)),
                                std::abs(t.total - (ce + la * kl_a + lm * kl_m))});

        // Priors equal to the predictions give zero KL; any other prior gives a positive one.
        const auto same = training::loss(pass.action_probs, y, pass.motor, pass.motor, pass.hotspot, pass.hotspot, lm, la);
        worst_zero = std::max({worst_zero, std::abs(same.kl_motor), std::abs(same.kl_hotspot)});
        min_positive = std::min({min_positive, t.kl_motor, t.kl_hotspot});
    }
    const std::vector<double> p{1.0, 0.0}, q{0.5, 0.5};
    const double coin = std::abs(training::kl_divergence(p, q) - std::log(2.0));
    return {worst_total <= 1e-9 && worst_zero == 0.0 && min_positive > 0.0 && coin <= 1e-9,
            fmt("max |total - sum| %.2e, KL(p||p) max %.1e, min KL(p||q) %.2e, |KL([1,0]||[.5,.5]) - log 2| %.1e", worst_total,
                worst_zero, min_positive, coin)};
}

// ---------------------------------------------------------------------------------------------
// 5. Metric oracles

double oracle_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Outcome metric_oracles() {
    Rng rng(5);
    const Grid2 g{4, 4};
    int prf_mismatch = 0;
    double kld_dev = 0.0;
    for (int rep = 0; rep < 2000; ++rep) {
        HotspotMap pred(g), gt(g);
        pred.probs = random_simplex(16, rng);
        gt.probs = random_simplex(16, rng);
        if (rep % 4 == 0) {
            // Coarse values produce ties and empty sets.
            for (double& v : pred.probs) v = static_cast<double>(rng.index(3));
            for (double& v : gt.probs) v = static_cast<double>(rng.index(3)) + 0.5;
        }
        const double tp_thr = oracle_quantile(pred.probs, 0.75), tg_thr = oracle_quantile(gt.probs, 0.75);
        int tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < 16; ++i) {
            const bool a = pred.probs[i] > tp_thr, b = gt.probs[i] > tg_thr;
            tp += a && b;
            fp += a && !b;
            fn += !a && b;
        }
        const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        const double f1 = (tp + fp == 0 || precision + recall == 0.0) ? 0.0 : 2.0 * precision * recall / (precision + recall);
        const auto r = metrics::hotspot_prf(pred, gt, 0.75);
        if (r.precision != precision || r.recall != recall || std::abs(r.f1 - f1) > 1e-15) ++prf_mismatch;

        double sp = 0.0, sg = 0.0;
        for (std::size_t i = 0; i < 16; ++i) {
            sp += pred.probs[i];
            sg += gt.probs[i];
        }
        if (sp > 0.0 && sg > 0.0) {
            double kl = 0.0;
            for (std::size_t i = 0; i < 16; ++i) {
                const double a = std::max(gt.probs[i] / sg, 1e-12), b = std::max(pred.probs[i] / sp, 1e-12);
                kl += a * std::log(a / b);
            }
            kld_dev = std::max(kld_dev, std::abs(metrics::heatmap_kld(pred, gt) - kl) / std::max(1.0, kl));
        }
    }

    // Hand-built displacement fixtures with closed-form answers.
    double traj_dev = 0.0;
    {
        AttentionVolume v(Grid3{3, 4, 4});
        for (int t = 0; t < 3; ++t) v.at(t, 1, 1) = 1.0;  // centre of cell (1,1) = (0.375, 0.375)
        const Trajectory gt{{0.375, 0.125}, {0.375, 0.125}, {0.375, 0.125}};
        const auto e = metrics::trajectory_errors(v, gt);
        traj_dev = std::max({traj_dev, std::abs(e.ade - 0.25), std::abs(e.fde - 0.25)});
    }
    {
        const Trajectory pred{{0.1, 0.1}, {0.4, 0.5}, {0.7, 0.9}};
        const Trajectory gt{{0.1, 0.1}, {0.1, 0.1}, {0.1, 0.1}};
        const auto e = metrics::displacement_errors(pred, gt);
        traj_dev = std::max({traj_dev, std::abs(e.ade - (0.0 + 0.5 + 1.0) / 3.0), std::abs(e.fde - 1.0)});
    }
    {
        AttentionVolume v(Grid3{2, 2, 2});
        v.at(0, 0, 0) = 1.0;
        v.at(1, 1, 1) = 1.0;
        const Trajectory gt{{0.25, 0.25}, {0.25, 0.25}};
        const auto e = metrics::trajectory_errors(v, gt);
        traj_dev = std::max({traj_dev, std::abs(e.ade - std::sqrt(0.5) / 2.0), std::abs(e.fde - std::sqrt(0.5))});
    }
    return {prf_mismatch == 0 && kld_dev <= 1e-12 && traj_dev <= 1e-9,
            fmt("2000 4x4 pairs: %d P/R/F1 mismatches, max KLD rel dev %.1e; ADE/FDE fixtures max dev %.1e", prf_mismatch, kld_dev,
                traj_dev)};
}

// ---------------------------------------------------------------------------------------------
// 6 and 7. End-to-end training on the default synthetic set

struct EndToEnd {
    bool ran = false;
    double joint_top1 = 0.0, ablation_top1 = 0.0;
    double joint_kld = 0.0, center_kld = 0.0;
    double minutes = 0.0;
};

EndToEnd& end_to_end(const fs::path& work) {
    static EndToEnd result;
    if (result.ran) return result;
    result.ran = true;
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path data_dir = work / "default_set";
    const synth::SceneConfig scene;  // 64x64, 16 observed frames, 12 actions
    synth::DatasetOptions opts;
    opts.with_priors = true;
    if (fs::exists(data_dir)) fs::remove_all(data_dir);
    synth::generate_dataset(scene, 2000, 400, data_dir, opts);

    const model::ModelConfig cfg;
    const training::Dataset data = training::load_dataset(data_dir, cfg);
    auto run = [&](const training::TrainConfig& t, const char* tag) {
        training::TrainOptions o;
        o.on_epoch = [tag](const training::EpochRecord& r) {
            std::printf("    [%s] epoch %2d  loss %.4f  train %.3f  val %.3f  (%.1f s)\n", tag, r.epoch, r.train_loss.total, r.train_top1,
                        r.val_top1, r.wall_seconds);
            std::fflush(stdout);
        };
        return training::train(data, cfg, t, o);
    };
    const training::TrainConfig joint;
    const auto joint_run = run(joint, "joint");
    training::TrainConfig ablation = joint;
    ablation.lambda_motor = 0.0;
    ablation.lambda_hotspot = 0.0;
    const auto ablation_run = run(ablation, "ablation");

    const auto jm = report::evaluate_split(cfg, joint_run.params, data.val);
    const auto am = report::evaluate_split(cfg, ablation_run.params, data.val);
    result.joint_top1 = jm.top1;
    result.ablation_top1 = am.top1;
    result.joint_kld = jm.kld;
    const HotspotMap prior = baselines::center_prior(cfg.hotspot_grid);
    for (const auto& ex : data.val) result.center_kld += metrics::heatmap_kld(prior, report::hotspot_ground_truth(ex.clip, cfg.hotspot_grid));
    result.center_kld /= static_cast<double>(data.val.size());
    result.minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    return result;
}

Outcome learning(const fs::path& work) {
    const auto& r = end_to_end(work);
    const double gap = r.joint_top1 - r.ablation_top1;
    return {r.joint_top1 >= 0.90 && gap >= 0.03,
            fmt("val top-1 joint %.3f, ablation %.3f (gap %.1f points), chance 0.083; %.1f min", r.joint_top1, r.ablation_top1,
                100.0 * gap, r.minutes)};
}

Outcome hotspot_ordering(const fs::path& work) {
    const auto& r = end_to_end(work);
    return {r.joint_kld <= r.center_kld, fmt("val KLD model %.4f vs center prior %.4f", r.joint_kld, r.center_kld)};
}

// ---------------------------------------------------------------------------------------------
// 8. Baselines

Outcome baseline_sanity() {
    Rng rng(8);
    double worst_fde = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const double ax = rng.uniform(-1e-3, 1e-3), bx = rng.uniform(-0.02, 0.02), cx = rng.uniform(0.2, 0.8);
        const double ay = rng.uniform(-1e-3, 1e-3), by = rng.uniform(-0.02, 0.02), cy = rng.uniform(0.2, 0.8);
        auto at = [&](double t) { return Point2{cx + bx * t + ax * t * t, cy + by * t + ay * t * t}; };
        Trajectory obs, fut;
        for (int k = 0; k < 16; ++k) obs.push_back(at(k));
        for (int k = 16; k < 24; ++k) fut.push_back(at(k));
        worst_fde = std::max(worst_fde, metrics::displacement_errors(baselines::kalman_forecast(obs, 8), fut).fde);
    }

    baselines::CorpusOptions train_opts;
    train_opts.seed = 81;
    baselines::CorpusOptions test_opts;
    test_opts.seed = 82;
    const auto train_set = baselines::curved_trajectory_corpus(2000, train_opts);
    const auto test_set = baselines::curved_trajectory_corpus(500, test_opts);
    baselines::LstmForecaster lstm(64);
    lstm.train(train_set, baselines::LstmTrainConfig{});
    double lstm_ade = 0.0, kalman_ade = 0.0;
    for (const auto& s : test_set) {
        const int n = static_cast<int>(s.future.size());
        lstm_ade += metrics::displacement_errors(baselines::lstm_forecast(s.observed, n, lstm), s.future).ade;
        kalman_ade += metrics::displacement_errors(baselines::kalman_forecast(s.observed, n), s.future).ade;
    }
    lstm_ade /= static_cast<double>(test_set.size());
    kalman_ade /= static_cast<double>(test_set.size());
    return {worst_fde < 1e-6 && lstm_ade < kalman_ade,
            fmt("Kalman max FDE on quadratics %.1e; curved split ADE LSTM %.4f vs Kalman %.4f", worst_fde, lstm_ade, kalman_ade)};
}

// ---------------------------------------------------------------------------------------------
// 9. Pseudo ground truth

Outcome pseudo_gt() {
    Rng rng(9);
    bool identity_exact = true;
    for (int rep = 0; rep < 100; ++rep) {
        Trajectory pts;
        for (int k = 0; k < 8; ++k) pts.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
        const std::vector<Eigen::Matrix3d> eye(8, Eigen::Matrix3d::Identity());
        identity_exact = identity_exact && priors::project_trajectory(pts, eye) == pts;
    }

    constexpr int kTrials = 50;
    double worst_px = 0.0;
    for (int trial = 0; trial < kTrials; ++trial) {
        Eigen::Matrix3d h;
        h << 1.0 + rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-5, 5), rng.uniform(-0.1, 0.1),
            1.0 + rng.uniform(-0.1, 0.1), rng.uniform(-5, 5), rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3), 1.0;
        std::vector<Point2> src, dst;
        for (int i = 0; i < 40; ++i) {
            const Point2 s{rng.uniform(0, 64), rng.uniform(0, 64)};
            src.push_back(s);
            dst.push_back(i % 10 < 3 ? Point2{rng.uniform(0, 64), rng.uniform(0, 64)} : priors::apply_homography(h, s));
        }
        priors::RansacOptions o;
        o.seed = static_cast<std::uint64_t>(trial);
        const auto est = priors::estimate_homography(src, dst, o);
        for (int r = 0; r <= 8; ++r) {
            for (int c = 0; c <= 8; ++c) {
                const Point2 p{8.0 * c, 8.0 * r};
                const Point2 a = priors::apply_homography(est, p), b = priors::apply_homography(h, p);
                worst_px = std::max(worst_px, std::hypot(a.x - b.x, a.y - b.y));
            }
        }
    }

    bool interp_exact = true;
    for (int rep = 0; rep < 100; ++rep) {
        const Point2 a{rng.uniform(0, 1), rng.uniform(0, 1)}, b{rng.uniform(0, 1), rng.uniform(0, 1)};
        const int n = 2 + static_cast<int>(rng.index(10));
        const auto line = priors::interpolate_trajectory(a, b, n);
        for (int k = 0; k < n; ++k) {
            const double s = static_cast<double>(k) / (n - 1);
            const Point2 want{a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
            interp_exact = interp_exact && line[static_cast<std::size_t>(k)] == want;
        }
        interp_exact = interp_exact && line.front() == a;
    }
    return {identity_exact && worst_px <= 0.5 && interp_exact,
            fmt("identity projection %s; RANSAC worst error %.2e px over %d trials (30%% outliers); interpolation %s",
                identity_exact ? "exact" : "INEXACT", worst_px, kTrials, interp_exact ? "exact" : "INEXACT")};
}

// ---------------------------------------------------------------------------------------------
// 10. Determinism and persistence

Outcome persistence(const fs::path& work) {
    synth::SceneConfig scene;
    scene.height = 32;
    scene.width = 32;
    scene.num_frames_observed = 8;
    scene.num_frames_future = 4;
    model::ModelConfig cfg;
    cfg.frames = 8;
    cfg.height = 32;
    cfg.width = 32;
    cfg.channels = {4, 4, 6, 6, 8};
    cfg.strides = {{{2, 2, 2}, {1, 2, 2}, {1, 2, 2}, {1, 2, 2}, {1, 1, 1}}};
    cfg.motor_grid = {4, 8, 8};
    cfg.hotspot_grid = {4, 4};
    training::Dataset data;
    data.num_actions = cfg.num_actions;
    for (int i = 0; i < 14; ++i) {
        training::Example ex;
        ex.clip = synth::generate_clip(scene, 1000 + static_cast<std::uint64_t>(i));
        ex.motor_prior = priors::render_trajectory_prior(ex.clip.future_trajectory, cfg.motor_grid, 1.0);
        ex.hotspot_prior = priors::render_point_prior(ex.clip.hotspot_point, cfg.hotspot_grid, 1.0);
        (i < 10 ? data.train : data.val).push_back(std::move(ex));
    }
    training::TrainConfig t;
    t.epochs = 2;
    t.batch_size = 4;
    t.seed = 10;
    const auto a = training::train(data, cfg, t);
    const auto b = training::train(data, cfg, t);
    const bool reproducible = a.params.checksum() == b.params.checksum() &&
                              a.history.back().train_loss.total == b.history.back().train_loss.total;

    const fs::path path = work / "persistence.ckpt";
    training::save_checkpoint(a.params, cfg, path);
    const auto loaded = training::load_checkpoint(path, &cfg);
    const bool lossless = loaded.params == a.params && loaded.config == cfg &&
                          training::encode_checkpoint(loaded) == training::encode_checkpoint(training::decode_checkpoint(training::encode_checkpoint(loaded)));

    const std::string before = loaded.params.checksum();
    for (const auto& ex : data.val) (void)inference::predict(cfg, loaded.params, ex.clip);
    (void)inference::predict_multiclip(cfg, loaded.params, data.val.front().clip, 1, 1);
    const bool untouched = loaded.params.checksum() == before;
    return {reproducible && lossless && untouched,
            fmt("two seeded runs %s (%s); checkpoint round trip %s; parameters after inference %s", reproducible ? "identical" : "DIFFER",
                a.params.checksum().c_str(), lossless ? "lossless" : "LOSSY", untouched ? "unchanged" : "CHANGED")};
}

}  // namespace

int main(int argc, char** argv) {
    fs::path work = fs::temp_directory_path() / "motorattn_acceptance";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (!a.empty() && std::all_of(a.begin(), a.end(), ::isdigit)) {
            only.insert(std::stoi(a));
        } else {
            work = a;
        }
    }
    fs::create_directories(work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"distribution invariants", distributions},
        {"gumbel-softmax correctness", gumbel},
        {"gradient checks", gradients},
        {"loss decomposition", loss_terms},
        {"metric oracles", metric_oracles},
        {"end-to-end learning", [&] { return learning(work); }},
        {"hotspot quality ordering", [&] { return hotspot_ordering(work); }},
        {"baseline sanity", baseline_sanity},
        {"pseudo ground truth", pseudo_gt},
        {"determinism and persistence", [&] { return persistence(work); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += o.pass ? 0 : 1;
        std::printf("%s  %2d. %-28s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
