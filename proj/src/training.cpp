#include "motorattn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <limits>
#include <numbers>

#include "motorattn/binary_io.hpp"
#include "motorattn/priors.hpp"

namespace motorattn::training {

namespace {

constexpr double kCenterMomentum = 0.1;

constexpr double kFloor = 1e-12;

double clamped_log(double v) { return std::log(std::max(v, kFloor)); }

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw Error("weight_decay must be non-negative");
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (epochs < 0) throw Error("epochs must be non-negative");
    if (!(lambda_motor >= 0.0) || !(lambda_hotspot >= 0.0)) throw Error("loss weights must be non-negative");
    if (!(temperature > 0.0)) throw Error("Gumbel temperature must be positive");
    if (!(grad_clip >= 0.0)) throw Error("grad_clip must be non-negative");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"learning_rate", c.learning_rate}, {"momentum", c.momentum},
                       {"weight_decay", c.weight_decay},   {"batch_size", c.batch_size},
                       {"epochs", c.epochs},               {"cosine_decay", c.cosine_decay},
                       {"lambda_motor", c.lambda_motor},   {"lambda_hotspot", c.lambda_hotspot},
                       {"temperature", c.temperature},     {"augment_flip", c.augment_flip},
                       {"grad_clip", c.grad_clip},         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    TrainConfig d;
    d.learning_rate = j.value("learning_rate", d.learning_rate);
    d.momentum = j.value("momentum", d.momentum);
    d.weight_decay = j.value("weight_decay", d.weight_decay);
    d.batch_size = j.value("batch_size", d.batch_size);
    d.epochs = j.value("epochs", d.epochs);
    d.cosine_decay = j.value("cosine_decay", d.cosine_decay);
    d.lambda_motor = j.value("lambda_motor", d.lambda_motor);
    d.lambda_hotspot = j.value("lambda_hotspot", d.lambda_hotspot);
    d.temperature = j.value("temperature", d.temperature);
    d.augment_flip = j.value("augment_flip", d.augment_flip);
    d.grad_clip = j.value("grad_clip", d.grad_clip);
    d.seed = j.value("seed", d.seed);
    c = d;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw Error("kl_divergence: shape mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = std::max(p[i], kFloor);
        kl += pi * (std::log(pi) - clamped_log(q[i]));
    }
    return kl;
}

double kl_divergence(const HotspotMap& p, const HotspotMap& q) {
    if (!(p.grid == q.grid)) throw Error("kl_divergence: shape mismatch");
    return kl_divergence(p.probs, q.probs);
}

double kl_divergence(const AttentionVolume& p, const AttentionVolume& q) {
    if (!(p.grid == q.grid)) throw Error("kl_divergence: shape mismatch");
    const auto n = static_cast<std::size_t>(p.grid.slice_cells());
    double total = 0.0;
    for (int t = 0; t < p.grid.t; ++t) {
        const auto off = static_cast<std::size_t>(t) * n;
        total += kl_divergence(std::span<const double>(p.probs).subspan(off, n), std::span<const double>(q.probs).subspan(off, n));
    }
    return total / p.grid.t;
}

LossTerms loss(std::span<const double> action_probs, int label, const AttentionVolume& motor,
               const AttentionVolume& motor_prior, const HotspotMap& hotspot, const HotspotMap& hotspot_prior,
               double lambda_motor, double lambda_hotspot) {
    if (label < 0 || static_cast<std::size_t>(label) >= action_probs.size()) {
        throw Error("invalid label " + std::to_string(label) + " for " + std::to_string(action_probs.size()) + " classes");
    }
    LossTerms t;
    t.cross_entropy = -clamped_log(action_probs[static_cast<std::size_t>(label)]);
    t.kl_motor = kl_divergence(motor, motor_prior);
    t.kl_hotspot = kl_divergence(hotspot, hotspot_prior);
    t.total = t.cross_entropy + lambda_hotspot * t.kl_hotspot + lambda_motor * t.kl_motor;
    return t;
}

model::HeadGradients loss_gradients(const model::ForwardPass& pass, int label, const AttentionVolume& motor_prior,
                                    const HotspotMap& hotspot_prior, double lambda_motor, double lambda_hotspot) {
    model::HeadGradients g;
    g.action_logits = pass.action_probs;
    g.action_logits[static_cast<std::size_t>(label)] -= 1.0;
    // d/dp of p log p - p log q is log p + 1 - log q.
    if (lambda_motor > 0.0) {
        const double scale = lambda_motor / pass.motor.grid.t;
        g.motor_probs.resize(pass.motor.probs.size());
        for (std::size_t i = 0; i < g.motor_probs.size(); ++i) {
            const double p = pass.motor.probs[i];
            g.motor_probs[i] = p > kFloor ? scale * (std::log(p) + 1.0 - clamped_log(motor_prior.probs[i])) : 0.0;
        }
    }
    if (lambda_hotspot > 0.0) {
        g.hotspot_probs.resize(pass.hotspot.probs.size());
        for (std::size_t i = 0; i < g.hotspot_probs.size(); ++i) {
            const double p = pass.hotspot.probs[i];
            g.hotspot_probs[i] =
                p > kFloor ? lambda_hotspot * (std::log(p) + 1.0 - clamped_log(hotspot_prior.probs[i])) : 0.0;
        }
    }
    return g;
}

Dataset load_dataset(const std::filesystem::path& dir, const model::ModelConfig& cfg) {
    const synth::DatasetManifest manifest = synth::load_manifest(dir);
    Dataset data;
    data.num_actions = manifest.generator.num_actions();
    if (data.num_actions != cfg.num_actions) {
        throw Error("dataset has " + std::to_string(data.num_actions) + " actions, model config expects " +
                    std::to_string(cfg.num_actions));
    }
    for (const auto& entry : manifest.clips) {
        Example ex;
        ex.clip = synth::load_clip(dir / entry.path);
        if (ex.clip.frames_count != cfg.frames || ex.clip.height != cfg.height || ex.clip.width != cfg.width ||
            ex.clip.channels != cfg.in_channels) {
            throw Error("clip " + entry.path + " does not match the model input shape");
        }
        if (!entry.priors_path.empty()) {
            auto p = synth::load_priors(dir / entry.priors_path);
            if (!(p.motor.grid == cfg.motor_grid) || !(p.hotspot.grid == cfg.hotspot_grid)) {
                throw Error("priors in " + entry.priors_path + " do not match the model attention grids");
            }
            ex.motor_prior = std::move(p.motor);
            ex.hotspot_prior = std::move(p.hotspot);
            ex.annotated = true;
        } else {
            ex.motor_prior = priors::uniform_prior(cfg.motor_grid);
            ex.hotspot_prior = priors::uniform_prior(cfg.hotspot_grid);
        }
        (entry.split == synth::Split::train ? data.train : data.val).push_back(std::move(ex));
    }
    if (data.train.empty()) throw Error("dataset has no training clips");
    return data;
}

Example flip_horizontal(const Example& ex) {
    Example out = ex;
    const auto& c = ex.clip;
    for (int t = 0; t < c.frames_count; ++t) {
        for (int r = 0; r < c.height; ++r) {
            for (int x = 0; x < c.width; ++x) {
                for (int ch = 0; ch < c.channels; ++ch) {
                    out.clip.frames[static_cast<std::size_t>(((t * c.height + r) * c.width + x) * c.channels + ch)] =
                        c.pixel(t, r, c.width - 1 - x, ch);
                }
            }
        }
    }
    auto mirror = [](Trajectory& traj) {
        for (auto& p : traj) p.x = 1.0 - p.x;
    };
    mirror(out.clip.future_trajectory);
    mirror(out.clip.observed_trajectory);
    out.clip.hotspot_point.x = 1.0 - out.clip.hotspot_point.x;
    // The mirror x -> 1 - x is its own inverse, so camera motions are conjugated by it.
    Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
    f(0, 0) = -1.0;
    f(0, 2) = 1.0;
    for (auto& h : out.clip.camera_motions) h = f * h * f;
    const Grid3 mg = ex.motor_prior.grid;
    for (int t = 0; t < mg.t; ++t) {
        for (int r = 0; r < mg.h; ++r) {
            for (int x = 0; x < mg.w; ++x) out.motor_prior.at(t, r, x) = ex.motor_prior.at(t, r, mg.w - 1 - x);
        }
    }
    const Grid2 hg = ex.hotspot_prior.grid;
    for (int r = 0; r < hg.h; ++r) {
        for (int x = 0; x < hg.w; ++x) out.hotspot_prior.at(r, x) = ex.hotspot_prior.at(r, hg.w - 1 - x);
    }
    return out;
}

nlohmann::json to_json(const EpochRecord& r) {
    auto terms = [](const LossTerms& t) {
        return nlohmann::json{{"total", t.total},
                              {"cross_entropy", t.cross_entropy},
                              {"kl_motor", t.kl_motor},
                              {"kl_hotspot", t.kl_hotspot}};
    };
    return nlohmann::json{{"epoch", r.epoch},         {"learning_rate", r.learning_rate},
                          {"train_loss", terms(r.train_loss)}, {"train_top1", r.train_top1},
                          {"val_loss", terms(r.val_loss)},     {"val_top1", r.val_top1},
                          {"wall_seconds", r.wall_seconds}};
}

// ---------------------------------------------------------------------------------------------
// Checkpoints

namespace {

void put_params(io::ByteWriter& w, const model::ModelParams& params) {
    std::uint32_t n = 0;
    params.for_each([&](const std::string&, const Eigen::MatrixXd&) { ++n; });
    w.put(n);
    params.for_each([&](const std::string& name, const Eigen::MatrixXd& m) {
        w.put_string(name);
        w.put(static_cast<std::uint32_t>(m.rows()));
        w.put(static_cast<std::uint32_t>(m.cols()));
        w.put_all<double>(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
    });
}

model::ModelParams get_params(io::ByteReader& r, const model::ModelConfig& cfg) {
    const auto n = r.get<std::uint32_t>();
    model::ModelParams params = model::ModelParams::zeros(cfg);
    std::uint32_t expected_n = 0;
    params.for_each([&](const std::string&, const Eigen::MatrixXd&) { ++expected_n; });
    if (n != expected_n) {
        throw Error("checkpoint shape mismatch: expected " + std::to_string(expected_n) + " arrays, found " +
                    std::to_string(n));
    }
    params.for_each([&](const std::string& name, Eigen::MatrixXd& m) {
        const std::string stored = r.get_string();
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        if (stored != name || rows != m.rows() || cols != m.cols()) {
            throw Error("checkpoint shape mismatch: expected " + name + " " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", found " + stored + " " + std::to_string(rows) + "x" +
                        std::to_string(cols));
        }
        const auto values = r.get_all<double>(static_cast<std::size_t>(m.size()));
        std::copy(values.begin(), values.end(), m.data());
    });
    return params;
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
    io::ByteWriter w;
    w.magic("MACK");
    w.put(kCheckpointFormatVersion);
    w.put_string(nlohmann::json(ckpt.config).dump());
    w.put_string(ckpt.train_config ? nlohmann::json(*ckpt.train_config).dump() : std::string());
    w.put(static_cast<std::uint32_t>(ckpt.epoch));
    w.put(ckpt.best_val_top1);
    put_params(w, ckpt.params);
    w.put(static_cast<std::uint8_t>(ckpt.velocity ? 1 : 0));
    if (ckpt.velocity) put_params(w, *ckpt.velocity);
    return w.bytes();
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
    io::ByteReader r(bytes, "corrupt checkpoint: truncated data");
    if (!r.magic("MACK")) throw Error("corrupt checkpoint: bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointFormatVersion) {
        throw Error("unsupported checkpoint format version: expected " + std::to_string(kCheckpointFormatVersion) +
                    ", found " + std::to_string(version));
    }
    Checkpoint ckpt;
    try {
        ckpt.config = nlohmann::json::parse(r.get_string()).get<model::ModelConfig>();
        const std::string tc = r.get_string();
        if (!tc.empty()) ckpt.train_config = nlohmann::json::parse(tc).get<TrainConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("corrupt checkpoint: bad config: ") + e.what());
    }
    ckpt.config.validate();
    ckpt.epoch = static_cast<int>(r.get<std::uint32_t>());
    ckpt.best_val_top1 = r.get<double>();
    ckpt.params = get_params(r, ckpt.config);
    if (r.get<std::uint8_t>() != 0) ckpt.velocity = get_params(r, ckpt.config);
    if (r.remaining() != 0) throw Error("corrupt checkpoint: trailing bytes");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_checkpoint(ckpt));
}

void save_checkpoint(const model::ModelParams& params, const model::ModelConfig& cfg, const std::filesystem::path& path) {
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.params = params;
    save_checkpoint(ckpt, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const model::ModelConfig* expected) {
    Checkpoint ckpt = decode_checkpoint(io::read_file(path));
    if (expected != nullptr) {
        if (expected->num_actions != ckpt.config.num_actions) {
            throw Error("checkpoint num_actions mismatch: expected " + std::to_string(expected->num_actions) +
                        ", found " + std::to_string(ckpt.config.num_actions));
        }
        if (!(*expected == ckpt.config)) {
            throw Error("checkpoint model config does not match: expected " + nlohmann::json(*expected).dump() +
                        ", found " + nlohmann::json(ckpt.config).dump());
        }
    }
    return ckpt;
}

// ---------------------------------------------------------------------------------------------
// Optimization

std::pair<LossTerms, double> evaluate_loss(const model::ModelConfig& cfg, const model::ModelParams& params,
                                           std::span<const Example> examples, const TrainConfig& tcfg) {
    LossTerms sum;
    int correct = 0;
    for (const Example& ex : examples) {
        const auto pass = model::forward(cfg, params, model::clip_to_tensor(ex.clip), model::SamplingNoise::deterministic());
        const LossTerms t = loss(pass.action_probs, ex.clip.label.action_id, pass.motor, ex.motor_prior, pass.hotspot,
                                 ex.hotspot_prior, tcfg.lambda_motor, tcfg.lambda_hotspot);
        sum.cross_entropy += t.cross_entropy;
        sum.kl_motor += t.kl_motor;
        sum.kl_hotspot += t.kl_hotspot;
        sum.total += t.total;
        const auto best = std::max_element(pass.action_probs.begin(), pass.action_probs.end()) - pass.action_probs.begin();
        correct += best == ex.clip.label.action_id ? 1 : 0;
    }
    if (examples.empty()) return {sum, 0.0};
    const double n = static_cast<double>(examples.size());
    sum.cross_entropy /= n;
    sum.kl_motor /= n;
    sum.kl_hotspot /= n;
    sum.total /= n;
    return {sum, correct / n};
}

namespace {

bool decays(const std::string& name) { return name.ends_with(".weight"); }

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
    return idx;
}

}  // namespace

TrainResult train(const Dataset& data, const model::ModelConfig& cfg, const TrainConfig& tcfg, const TrainOptions& options) {
    cfg.validate();
    tcfg.validate();
    if (data.train.empty()) throw Error("dataset has no training clips");

    TrainResult result;
    int start_epoch = 0;
    double best_top1 = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();
    model::ModelParams velocity = model::ModelParams::zeros(cfg);
    if (options.resume) {
        if (!(options.resume->config == cfg)) throw Error("resume checkpoint was trained with a different model config");
        result.params = options.resume->params;
        start_epoch = options.resume->epoch;
        best_top1 = options.resume->best_val_top1;
        if (options.resume->velocity) velocity = *options.resume->velocity;
    } else {
        result.params = model::ModelParams::initialize(cfg, tcfg.seed);
    }
    result.best_params = result.params;
    result.best_epoch = start_epoch;

    std::ofstream log;
    if (!options.log_path.empty()) {
        log.open(options.log_path, options.resume ? std::ios::app : std::ios::trunc);
        if (!log) throw Error("cannot open metrics log " + options.log_path.string());
    }

    const std::size_t n = data.train.size();
    const auto batch = static_cast<std::size_t>(tcfg.batch_size);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;
    const double total_steps = static_cast<double>(steps_per_epoch) * std::max(tcfg.epochs, 1);
    model::ModelParams grads = model::ModelParams::zeros(cfg);
    model::ModelParams& params = result.params;
    const model::GumbelConfig gumbel{tcfg.temperature, true, tcfg.seed};

    for (int epoch = start_epoch; epoch < tcfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng order_rng = Rng::stream(tcfg.seed, static_cast<std::uint64_t>(epoch), 0x0bde5ULL);
        const auto order = permutation(n, order_rng);
        LossTerms running;
        int correct = 0;
        double lr = tcfg.learning_rate;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            const double progress = (static_cast<double>(epoch) * steps_per_epoch + step) / total_steps;
            lr = tcfg.cosine_decay ? 0.5 * tcfg.learning_rate * (1.0 + std::cos(std::numbers::pi * progress))
                                   : tcfg.learning_rate;
            grads.set_zero();
            const std::size_t begin = step * batch, end = std::min(n, begin + batch);
            Eigen::VectorXd feature_sum = Eigen::VectorXd::Zero(params.feature_center.rows());
            for (std::size_t k = begin; k < end; ++k) {
                const std::size_t idx = order[k];
                Rng rng = Rng::stream(tcfg.seed, static_cast<std::uint64_t>(epoch), 1 + idx);
                const bool flip = tcfg.augment_flip && rng.uniform() < 0.5;
                const Example flipped = flip ? flip_horizontal(data.train[idx]) : Example{};
                const Example& ex = flip ? flipped : data.train[idx];
                const auto noise = model::SamplingNoise::draw(cfg, gumbel, rng);
                const auto pass = model::forward(cfg, params, model::clip_to_tensor(ex.clip), noise);
                const int y = ex.clip.label.action_id;
                const LossTerms t = loss(pass.action_probs, y, pass.motor, ex.motor_prior, pass.hotspot, ex.hotspot_prior,
                                         tcfg.lambda_motor, tcfg.lambda_hotspot);
                if (!std::isfinite(t.total)) {
                    std::ostringstream msg;
                    msg << "diverged: non-finite loss at epoch " << epoch + 1 << ", step " << step + 1
                        << " (cross_entropy=" << t.cross_entropy << ", kl_motor=" << t.kl_motor
                        << ", kl_hotspot=" << t.kl_hotspot << ", lr=" << lr << ")";
                    throw DivergenceError(msg.str());
                }
                running.cross_entropy += t.cross_entropy;
                running.kl_motor += t.kl_motor;
                running.kl_hotspot += t.kl_hotspot;
                running.total += t.total;
                const auto best =
                    std::max_element(pass.action_probs.begin(), pass.action_probs.end()) - pass.action_probs.begin();
                correct += best == y ? 1 : 0;
                feature_sum += pass.pooled_features;
                model::backward(cfg, params, pass,
                                loss_gradients(pass, y, ex.motor_prior, ex.hotspot_prior, tcfg.lambda_motor,
                                               tcfg.lambda_hotspot),
                                grads);
            }
            double inv = 1.0 / static_cast<double>(end - begin);
            if (tcfg.grad_clip > 0.0) {
                double sq = 0.0;
                grads.for_each([&](const std::string&, const Eigen::MatrixXd& m) { sq += m.squaredNorm(); });
                const double norm = std::sqrt(sq) * inv;
                if (norm > tcfg.grad_clip) inv *= tcfg.grad_clip / norm;
            }
            // Momentum SGD with decoupled-from-bias weight decay: v = mu v + g + wd w; w -= lr v.
            std::vector<Eigen::MatrixXd*> g_list, v_list;
            grads.for_each([&](const std::string&, Eigen::MatrixXd& m) { g_list.push_back(&m); });
            velocity.for_each([&](const std::string&, Eigen::MatrixXd& m) { v_list.push_back(&m); });
            std::size_t i = 0;
            params.for_each([&](const std::string& name, Eigen::MatrixXd& w) {
                Eigen::MatrixXd& g = *g_list[i];
                Eigen::MatrixXd& v = *v_list[i];
                ++i;
                if (model::ModelParams::is_buffer(name)) return;
                g *= inv;
                if (decays(name)) g += tcfg.weight_decay * w;
                v = tcfg.momentum * v + g;
                w -= lr * v;
            });
            // Classifier input centring: exponential moving average of the batch feature means.
            const Eigen::VectorXd batch_mean = feature_sum / static_cast<double>(end - begin);
            const bool first_step = epoch == 0 && step == 0;
            params.feature_center.col(0) = first_step ? batch_mean
                                                      : (1.0 - kCenterMomentum) * params.feature_center.col(0) +
                                                            kCenterMomentum * batch_mean;
            if (!params.all_finite()) {
                throw DivergenceError("diverged: non-finite parameters after epoch " + std::to_string(epoch + 1) +
                                      ", step " + std::to_string(step + 1) + " (lr=" + std::to_string(lr) + ")");
            }
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.learning_rate = lr;
        rec.train_loss.cross_entropy = running.cross_entropy / n;
        rec.train_loss.kl_motor = running.kl_motor / n;
        rec.train_loss.kl_hotspot = running.kl_hotspot / n;
        rec.train_loss.total = running.total / n;
        rec.train_top1 = static_cast<double>(correct) / n;
        const auto [val_loss, val_top1] = evaluate_loss(cfg, params, data.val, tcfg);
        if (!std::isfinite(val_loss.total)) {
            throw DivergenceError("diverged: non-finite validation loss at epoch " + std::to_string(epoch + 1));
        }
        rec.val_loss = val_loss;
        rec.val_top1 = val_top1;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const bool improved = val_top1 > best_top1 || (val_top1 == best_top1 && val_loss.total < best_loss);
        if (improved) {
            best_top1 = val_top1;
            best_loss = val_loss.total;
            result.best_params = params;
            result.best_epoch = epoch + 1;
        }
        if (!options.checkpoint_path.empty()) {
            Checkpoint ckpt;
            ckpt.config = cfg;
            ckpt.train_config = tcfg;
            ckpt.epoch = epoch + 1;
            ckpt.best_val_top1 = best_top1;
            if (improved) {
                ckpt.params = params;
                save_checkpoint(ckpt, options.checkpoint_path);
            }
            ckpt.params = params;
            ckpt.velocity = velocity;
            std::filesystem::path last = options.checkpoint_path;
            last += ".last";
            save_checkpoint(ckpt, last);
        }
        if (log) {
            log << to_json(rec).dump() << '\n';
            log.flush();
        }
        if (options.on_epoch) options.on_epoch(rec);
        result.history.push_back(rec);
    }
    return result;
}

}  // namespace motorattn::training
