#include "motorattn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "motorattn/binary_io.hpp"

namespace motorattn::model {

namespace {

constexpr double kLogFloor = 1e-12;

Grid3 grid_of(const Tensor4& t) { return t.grid(); }

void require(bool cond, const std::string& message) {
    if (!cond) throw Error(message);
}

}  // namespace

std::array<Grid3, kBlocks> ModelConfig::block_grids() const {
    std::array<Grid3, kBlocks> out{};
    Grid3 g{frames, height, width};
    for (int b = 0; b < kBlocks; ++b) {
        g = block_geometry(b).output_grid(g);
        out[static_cast<std::size_t>(b)] = g;
    }
    return out;
}

layers::ConvGeometry ModelConfig::block_geometry(int block) const {
    layers::ConvGeometry g;
    g.in_channels = block == 0 ? in_channels : channels[static_cast<std::size_t>(block - 1)];
    g.out_channels = channels[static_cast<std::size_t>(block)];
    g.kernel = {kernel, kernel, kernel};
    g.stride = strides[static_cast<std::size_t>(block)];
    g.padding = {kernel / 2, kernel / 2, kernel / 2};
    return g;
}

layers::ConvGeometry ModelConfig::motor_geometry() const {
    layers::ConvGeometry g;
    g.in_channels = channels[kMotorBlock];
    g.out_channels = 1;
    g.kernel = {head_kernel, head_kernel, head_kernel};
    g.stride = {1, 1, 1};
    g.padding = {head_kernel / 2, head_kernel / 2, head_kernel / 2};
    return g;
}

layers::ConvGeometry ModelConfig::hotspot_geometry() const {
    layers::ConvGeometry g;
    g.in_channels = channels[kHotspotBlock];
    g.out_channels = 1;
    g.kernel = {1, head_kernel, head_kernel};
    g.stride = {1, 1, 1};
    g.padding = {0, head_kernel / 2, head_kernel / 2};
    return g;
}

void ModelConfig::validate() const {
    require(frames >= 1 && height >= 1 && width >= 1 && in_channels >= 1, "model input dimensions must be positive");
    require(kernel >= 1 && kernel % 2 == 1, "backbone kernel must be odd");
    require(head_kernel >= 1 && head_kernel % 2 == 1, "head kernel must be odd");
    require(num_actions >= 1, "num_actions must be >= 1");
    for (int b = 0; b < kBlocks; ++b) {
        require(channels[static_cast<std::size_t>(b)] >= 1, "channel widths must be positive");
        for (int s : strides[static_cast<std::size_t>(b)]) require(s >= 1, "strides must be positive");
    }
    const auto grids = block_grids();
    for (const auto& g : grids) require(g.t >= 1 && g.h >= 1 && g.w >= 1, "backbone collapses the input to nothing");
    for (int b = 1; b < kBlocks; ++b) {
        require(grids[static_cast<std::size_t>(b)].h <= grids[static_cast<std::size_t>(b - 1)].h &&
                    grids[static_cast<std::size_t>(b)].w <= grids[static_cast<std::size_t>(b - 1)].w,
                "spatial size must be non-increasing with block index");
    }
    const Grid3 g2 = grids[kMotorBlock], g3 = grids[kHotspotBlock], g5 = grids[kActionBlock];
    require(motor_grid == g2, "motor grid must equal the phi2 grid");
    require(hotspot_grid == g3.spatial(), "hotspot grid must equal the phi3 spatial grid");
    auto divides = [](Grid3 big, Grid3 small) {
        return big.t % small.t == 0 && big.h % small.h == 0 && big.w % small.w == 0;
    };
    require(divides(motor_grid, g3), "motor grid must max-pool onto the phi3 grid by integer factors");
    require(divides(motor_grid, g5), "motor grid must max-pool onto the phi5 grid by integer factors");
    require(hotspot_grid.h % g5.h == 0 && hotspot_grid.w % g5.w == 0,
            "hotspot grid must max-pool onto the phi5 spatial grid by integer factors");
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
    j = nlohmann::json{{"frames", cfg.frames},
                       {"height", cfg.height},
                       {"width", cfg.width},
                       {"in_channels", cfg.in_channels},
                       {"channels", cfg.channels},
                       {"strides", cfg.strides},
                       {"kernel", cfg.kernel},
                       {"head_kernel", cfg.head_kernel},
                       {"motor_grid", {cfg.motor_grid.t, cfg.motor_grid.h, cfg.motor_grid.w}},
                       {"hotspot_grid", {cfg.hotspot_grid.h, cfg.hotspot_grid.w}},
                       {"num_actions", cfg.num_actions},
                       {"normalize_attention", cfg.normalize_attention}};
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
    ModelConfig d;
    d.frames = j.value("frames", d.frames);
    d.height = j.value("height", d.height);
    d.width = j.value("width", d.width);
    d.in_channels = j.value("in_channels", d.in_channels);
    d.channels = j.value("channels", d.channels);
    d.strides = j.value("strides", d.strides);
    d.kernel = j.value("kernel", d.kernel);
    d.head_kernel = j.value("head_kernel", d.head_kernel);
    if (j.contains("motor_grid")) {
        const auto g = j.at("motor_grid").get<std::array<int, 3>>();
        d.motor_grid = {g[0], g[1], g[2]};
    }
    if (j.contains("hotspot_grid")) {
        const auto g = j.at("hotspot_grid").get<std::array<int, 2>>();
        d.hotspot_grid = {g[0], g[1]};
    }
    d.num_actions = j.value("num_actions", d.num_actions);
    d.normalize_attention = j.value("normalize_attention", d.normalize_attention);
    cfg = d;
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
    ModelParams p;
    for (int b = 0; b < kBlocks; ++b) {
        const auto g = cfg.block_geometry(b);
        const auto i = static_cast<std::size_t>(b);
        p.conv_w[i] = Eigen::MatrixXd::Zero(g.out_channels, g.patch_size());
        p.conv_b[i] = Eigen::MatrixXd::Zero(g.out_channels, 1);
        p.norm_gamma[i] = Eigen::MatrixXd::Zero(g.out_channels, 1);
        p.norm_beta[i] = Eigen::MatrixXd::Zero(g.out_channels, 1);
    }
    p.motor_w = Eigen::MatrixXd::Zero(1, cfg.motor_geometry().patch_size());
    p.motor_b = Eigen::MatrixXd::Zero(1, 1);
    p.hotspot_w = Eigen::MatrixXd::Zero(1, cfg.hotspot_geometry().patch_size());
    p.hotspot_b = Eigen::MatrixXd::Zero(1, 1);
    p.classifier_w = Eigen::MatrixXd::Zero(cfg.num_actions, cfg.channels[kActionBlock]);
    p.classifier_b = Eigen::MatrixXd::Zero(cfg.num_actions, 1);
    p.feature_center = Eigen::MatrixXd::Zero(cfg.channels[kActionBlock], 1);
    return p;
}

ModelParams ModelParams::initialize(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelParams p = zeros(cfg);
    Rng rng = Rng::stream(seed, 0x1417ULL);
    auto fill_normal = [&](Eigen::MatrixXd& m, double stddev) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
    };
    for (int b = 0; b < kBlocks; ++b) {
        const auto i = static_cast<std::size_t>(b);
        fill_normal(p.conv_w[i], std::sqrt(2.0 / static_cast<double>(p.conv_w[i].cols())));
        p.norm_gamma[i].setOnes();
    }
    fill_normal(p.motor_w, std::sqrt(1.0 / static_cast<double>(p.motor_w.cols())));
    fill_normal(p.hotspot_w, std::sqrt(1.0 / static_cast<double>(p.hotspot_w.cols())));
    // The classifier starts at zero: uniform predictions and a chance-level loss.
    return p;
}

void ModelParams::set_zero() {
    for_each([](const std::string&, Eigen::MatrixXd& m) { m.setZero(); });
}

bool ModelParams::all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const Eigen::MatrixXd& m) { ok = ok && m.allFinite(); });
    return ok;
}

std::string ModelParams::checksum() const {
    std::vector<unsigned char> bytes;
    for_each([&](const std::string& name, const Eigen::MatrixXd& m) {
        bytes.insert(bytes.end(), name.begin(), name.end());
        const auto* raw = reinterpret_cast<const unsigned char*>(m.data());
        bytes.insert(bytes.end(), raw, raw + m.size() * static_cast<Eigen::Index>(sizeof(double)));
    });
    return io::checksum_hex(bytes);
}

std::size_t ModelParams::count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Eigen::MatrixXd& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
    std::vector<const Eigen::MatrixXd*> left, right;
    a.for_each([&](const std::string&, const Eigen::MatrixXd& m) { left.push_back(&m); });
    b.for_each([&](const std::string&, const Eigen::MatrixXd& m) { right.push_back(&m); });
    for (std::size_t i = 0; i < left.size(); ++i) {
        if (left[i]->rows() != right[i]->rows() || left[i]->cols() != right[i]->cols()) return false;
        if (std::memcmp(left[i]->data(), right[i]->data(), sizeof(double) * static_cast<std::size_t>(left[i]->size())) != 0) {
            return false;
        }
    }
    return true;
}

void GumbelConfig::validate() const {
    if (!(temperature > 0.0)) throw Error("Gumbel temperature must be positive");
}

Tensor4 clip_to_tensor(const synth::VideoClip& clip) {
    Tensor4 x(clip.channels, clip.frames_count, clip.height, clip.width);
    for (int t = 0; t < clip.frames_count; ++t) {
        for (int r = 0; r < clip.height; ++r) {
            for (int c = 0; c < clip.width; ++c) {
                for (int ch = 0; ch < clip.channels; ++ch) x.at(ch, t, r, c) = clip.pixel(t, r, c, ch);
            }
        }
    }
    return x;
}

FeaturePyramid backbone_forward(const ModelConfig& cfg, const ModelParams& params, const Tensor4& x,
                                BackboneCache* cache) {
    if (x.channels() != cfg.in_channels || x.frames() != cfg.frames || x.height() != cfg.height ||
        x.width() != cfg.width) {
        throw Error("input shape mismatch: expected " + std::to_string(cfg.frames) + "x" + std::to_string(cfg.height) +
                    "x" + std::to_string(cfg.width) + "x" + std::to_string(cfg.in_channels) + ", got " +
                    std::to_string(x.frames()) + "x" + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                    "x" + std::to_string(x.channels()));
    }
    FeaturePyramid out;
    RowMatrix scratch;
    layers::NormCache norm_scratch;
    const Tensor4* input = &x;
    for (int b = 0; b < kBlocks; ++b) {
        const auto i = static_cast<std::size_t>(b);
        RowMatrix& cols = cache != nullptr ? cache->columns[i] : scratch;
        layers::NormCache& norm = cache != nullptr ? cache->norms[i] : norm_scratch;
        const Tensor4 conv = layers::conv3d_forward(cfg.block_geometry(b), *input, params.conv_w[i], params.conv_b[i], cols);
        out.phi[i] = layers::instance_norm_forward(conv, params.norm_gamma[i], params.norm_beta[i], norm);
        layers::relu_inplace(out.phi[i]);
        input = &out.phi[i];
    }
    return out;
}

namespace {

struct MotorDistributions {
    std::vector<double> logits;
    std::vector<double> log_psi;
    AttentionVolume volume;
};

MotorDistributions motor_distributions(std::vector<double> logits, Grid3 grid) {
    MotorDistributions out;
    out.logits = std::move(logits);
    for (double v : out.logits) {
        if (!std::isfinite(v)) throw Error("motor head: non-finite activations");
    }
    out.log_psi = out.logits;
    const double m = *std::max_element(out.log_psi.begin(), out.log_psi.end());
    double total = 0.0;
    for (double v : out.log_psi) total += std::exp(v - m);
    const double lse = m + std::log(total);
    out.volume = AttentionVolume(grid);
    out.volume.psi.resize(out.logits.size());
    for (std::size_t i = 0; i < out.log_psi.size(); ++i) {
        out.log_psi[i] -= lse;
        out.volume.psi[i] = std::exp(out.log_psi[i]);
    }
    // Per-slice renormalization of psi, evaluated from the logits so that no slice underflows.
    const auto n = static_cast<std::size_t>(grid.slice_cells());
    for (int t = 0; t < grid.t; ++t) {
        const std::span<double> slice(out.volume.probs.data() + static_cast<std::size_t>(t) * n, n);
        std::copy_n(out.logits.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(t) * n), n, slice.begin());
        layers::softmax_inplace(slice);
    }
    return out;
}

// mean_t(w[t,h,w] * phi[c,t,h,w]) -> C x 1 x H x W
Tensor4 weighted_temporal_mean(const Tensor4& phi, std::span<const double> weights) {
    Tensor4 out(phi.channels(), 1, phi.height(), phi.width());
    const int T = phi.frames(), S = phi.height() * phi.width();
    const double scale = 1.0 / T;
    for (int c = 0; c < phi.channels(); ++c) {
        const double* src = phi.data() + static_cast<std::size_t>(c) * T * S;
        double* dst = out.data() + static_cast<std::size_t>(c) * S;
        for (int t = 0; t < T; ++t) {
            for (int s = 0; s < S; ++s) dst[s] += scale * weights[static_cast<std::size_t>(t * S + s)] * src[t * S + s];
        }
    }
    return out;
}

Eigen::VectorXd attention_pooled_features(const Tensor4& phi5, std::span<const double> motor, std::span<const double> hotspot) {
    const int C = phi5.channels(), T = phi5.frames(), S = phi5.height() * phi5.width();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(C);
    const double mscale = 1.0 / (T * S);
    const double hscale = 1.0 / S;
    for (int c = 0; c < C; ++c) {
        const double* src = phi5.data() + static_cast<std::size_t>(c) * T * S;
        double acc = 0.0;
        for (int i = 0; i < T * S; ++i) acc += motor[static_cast<std::size_t>(i)] * src[i];
        double acc_last = 0.0;
        const double* last = src + (T - 1) * S;
        for (int s = 0; s < S; ++s) acc_last += hotspot[static_cast<std::size_t>(s)] * last[s];
        f(c) = mscale * acc + hscale * acc_last;
    }
    return f;
}

// Gradient through normalize_slices.
std::vector<double> normalize_slices_backward(std::span<const double> weights, std::span<const double> normalized,
                                              std::span<const double> grad, int slices) {
    const std::size_t n = weights.size() / static_cast<std::size_t>(slices);
    std::vector<double> out(weights.size());
    for (std::size_t off = 0; off < weights.size(); off += n) {
        double sum = 0.0, dot = 0.0;
        for (std::size_t i = off; i < off + n; ++i) {
            sum += weights[i];
            dot += grad[i] * normalized[i];
        }
        const double scale = static_cast<double>(n) / sum;
        for (std::size_t i = off; i < off + n; ++i) out[i] = scale * (grad[i] - dot / static_cast<double>(n));
    }
    return out;
}

std::vector<double> log_clamped(std::span<const double> p) {
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(std::max(p[i], kLogFloor));
    return out;
}

}  // namespace

AttentionVolume motor_head(const Tensor4& phi2, const Eigen::MatrixXd& weight, const Eigen::MatrixXd& bias,
                           const layers::ConvGeometry& geometry, Grid3 grid) {
    RowMatrix cols;
    const Tensor4 z = layers::conv3d_forward(geometry, phi2, weight, bias, cols);
    if (!(grid_of(z) == grid)) throw Error("motor head: output grid does not match the motor grid");
    return motor_distributions(std::vector<double>(z.values().begin(), z.values().end()), grid).volume;
}

std::vector<double> gumbel_softmax(std::span<const double> log_probs, std::span<const double> noise, int slices,
                                   double temperature) {
    if (!(temperature > 0.0)) throw Error("Gumbel temperature must be positive");
    if (!noise.empty() && noise.size() != log_probs.size()) throw Error("Gumbel noise size mismatch");
    std::vector<double> out(log_probs.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (log_probs[i] + (noise.empty() ? 0.0 : noise[i])) / temperature;
    const std::size_t n = out.size() / static_cast<std::size_t>(slices);
    for (int t = 0; t < slices; ++t) layers::softmax_inplace(std::span<double>(out.data() + static_cast<std::size_t>(t) * n, n));
    return out;
}

std::vector<double> gumbel_softmax_backward(std::span<const double> sample, std::span<const double> grad_sample,
                                            int slices, double temperature) {
    std::vector<double> grad(grad_sample.begin(), grad_sample.end());
    const std::size_t n = grad.size() / static_cast<std::size_t>(slices);
    for (int t = 0; t < slices; ++t) {
        const auto off = static_cast<std::size_t>(t) * n;
        layers::softmax_backward_inplace(sample.subspan(off, n), std::span<double>(grad.data() + off, n));
    }
    for (double& g : grad) g /= temperature;
    return grad;
}

std::vector<double> draw_gumbel_noise(std::size_t n, Rng& rng) {
    std::vector<double> g(n);
    for (double& v : g) v = rng.gumbel();
    return g;
}

AttentionVolume gumbel_sample(const AttentionVolume& motor, double temperature, std::span<const double> noise) {
    const std::span<const double> psi = motor.psi.empty() ? std::span<const double>(motor.probs) : std::span<const double>(motor.psi);
    AttentionVolume out(motor.grid);
    out.probs = gumbel_softmax(log_clamped(psi), noise, motor.grid.t, temperature);
    return out;
}

AttentionVolume gumbel_sample(const AttentionVolume& motor, const GumbelConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto noise = cfg.noise_enabled ? draw_gumbel_noise(motor.probs.size(), rng) : std::vector<double>{};
    return gumbel_sample(motor, cfg.temperature, noise);
}

std::vector<double> gumbel_sample_backward_psi(const AttentionVolume& motor, const AttentionVolume& sample,
                                               std::span<const double> grad_sample, double temperature) {
    const std::span<const double> psi = motor.psi.empty() ? std::span<const double>(motor.probs) : std::span<const double>(motor.psi);
    auto grad = gumbel_softmax_backward(sample.probs, grad_sample, motor.grid.t, temperature);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = psi[i] > kLogFloor ? grad[i] / psi[i] : 0.0;
    return grad;
}

HotspotMap hotspot_sample(const HotspotMap& hotspot, double temperature, std::span<const double> noise) {
    HotspotMap out(hotspot.grid);
    out.probs = gumbel_softmax(log_clamped(hotspot.probs), noise, 1, temperature);
    return out;
}

HotspotMap hotspot_sample(const HotspotMap& hotspot, const GumbelConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto noise = cfg.noise_enabled ? draw_gumbel_noise(hotspot.probs.size(), rng) : std::vector<double>{};
    return hotspot_sample(hotspot, cfg.temperature, noise);
}

AttentionVolume pool_attention(const AttentionVolume& att, Grid3 target) {
    AttentionVolume out(target);
    out.probs = layers::max_pool(att.probs, att.grid, target);
    return out;
}

HotspotMap pool_attention(const HotspotMap& att, Grid2 target) {
    HotspotMap out(target);
    out.probs = layers::max_pool(att.probs, {1, att.grid.h, att.grid.w}, {1, target.h, target.w});
    return out;
}

std::vector<double> normalize_slices(std::span<const double> weights, int slices) {
    if (slices < 1 || weights.size() % static_cast<std::size_t>(slices) != 0) throw Error("normalize_slices: bad slice count");
    const std::size_t n = weights.size() / static_cast<std::size_t>(slices);
    std::vector<double> out(weights.begin(), weights.end());
    for (std::size_t off = 0; off < out.size(); off += n) {
        double sum = 0.0;
        for (std::size_t i = off; i < off + n; ++i) sum += out[i];
        // NaN passes through so that a diverged forward pass surfaces as a non-finite loss.
        if (sum <= 0.0) throw Error("normalize_slices: slice has no positive mass");
        const double scale = static_cast<double>(n) / sum;
        for (std::size_t i = off; i < off + n; ++i) out[i] *= scale;
    }
    return out;
}

HotspotMap hotspot_head(const Tensor4& phi3, const AttentionVolume& pooled_motor, const Eigen::MatrixXd& weight,
                        const Eigen::MatrixXd& bias, const layers::ConvGeometry& geometry, bool normalize) {
    if (!(pooled_motor.grid == phi3.grid())) throw Error("hotspot head: sampled motor attention grid does not match phi3");
    const Tensor4 input = weighted_temporal_mean(
        phi3, normalize ? normalize_slices(pooled_motor.probs, pooled_motor.grid.t) : pooled_motor.probs);
    RowMatrix cols;
    Tensor4 z = layers::conv3d_forward(geometry, input, weight, bias, cols);
    HotspotMap out({z.height(), z.width()});
    out.probs.assign(z.values().begin(), z.values().end());
    layers::softmax_inplace(out.probs);
    return out;
}

std::vector<double> anticipation_head(const Tensor4& phi5, const AttentionVolume& pooled_motor,
                                      const HotspotMap& pooled_hotspot, const Eigen::MatrixXd& weight,
                                      const Eigen::MatrixXd& bias, bool normalize) {
    if (!(pooled_motor.grid == phi5.grid())) throw Error("anticipation head: motor attention grid does not match phi5");
    if (!(pooled_hotspot.grid == Grid2{phi5.height(), phi5.width()})) {
        throw Error("anticipation head: hotspot grid does not match phi5");
    }
    if (weight.cols() != phi5.channels() || bias.rows() != weight.rows()) {
        throw Error("anticipation head: classifier shape does not match phi5 channels / class count");
    }
    const Eigen::VectorXd f =
        normalize ? attention_pooled_features(phi5, normalize_slices(pooled_motor.probs, pooled_motor.grid.t),
                                              normalize_slices(pooled_hotspot.probs, 1))
                  : attention_pooled_features(phi5, pooled_motor.probs, pooled_hotspot.probs);
    const Eigen::VectorXd logits = weight * f + bias.col(0);
    std::vector<double> probs(logits.data(), logits.data() + logits.size());
    layers::softmax_inplace(probs);
    return probs;
}

SamplingNoise SamplingNoise::draw(const ModelConfig& cfg, const GumbelConfig& gumbel, Rng& rng) {
    gumbel.validate();
    SamplingNoise n;
    n.temperature = gumbel.temperature;
    if (gumbel.noise_enabled) {
        n.motor = draw_gumbel_noise(static_cast<std::size_t>(cfg.motor_grid.cells()), rng);
        n.hotspot = draw_gumbel_noise(static_cast<std::size_t>(cfg.hotspot_grid.cells()), rng);
    }
    return n;
}

ForwardPass forward(const ModelConfig& cfg, const ModelParams& params, const Tensor4& x, const SamplingNoise& noise) {
    ForwardPass p;
    p.temperature = noise.temperature;
    p.features = backbone_forward(cfg, params, x, &p.backbone);
    const Tensor4& phi2 = p.features[kMotorBlock];
    const Tensor4& phi3 = p.features[kHotspotBlock];
    const Tensor4& phi5 = p.features[kActionBlock];

    // Motor attention and its sample.
    const Tensor4 z = layers::conv3d_forward(cfg.motor_geometry(), phi2, params.motor_w, params.motor_b, p.motor_columns);
    auto motor = motor_distributions(std::vector<double>(z.values().begin(), z.values().end()), cfg.motor_grid);
    p.motor_logits = std::move(motor.logits);
    p.log_psi = std::move(motor.log_psi);
    p.motor = std::move(motor.volume);
    p.motor_sample = gumbel_softmax(p.log_psi, noise.motor, cfg.motor_grid.t, noise.temperature);
    p.motor_pooled3 = layers::max_pool(p.motor_sample, cfg.motor_grid, phi3.grid(), &p.motor_argmax3);
    p.motor_pooled5 = layers::max_pool(p.motor_sample, cfg.motor_grid, phi5.grid(), &p.motor_argmax5);
    p.motor_weights3 = cfg.normalize_attention ? normalize_slices(p.motor_pooled3, phi3.frames()) : p.motor_pooled3;
    p.motor_weights5 = cfg.normalize_attention ? normalize_slices(p.motor_pooled5, phi5.frames()) : p.motor_pooled5;

    // Interaction hotspots conditioned on the sampled motor attention.
    p.hotspot_input = weighted_temporal_mean(phi3, p.motor_weights3);
    const Tensor4 za =
        layers::conv3d_forward(cfg.hotspot_geometry(), p.hotspot_input, params.hotspot_w, params.hotspot_b, p.hotspot_columns);
    p.hotspot = HotspotMap(cfg.hotspot_grid);
    p.hotspot.probs.assign(za.values().begin(), za.values().end());
    const double lse = layers::softmax_inplace(p.hotspot.probs);
    p.log_hotspot.assign(za.values().begin(), za.values().end());
    for (double& v : p.log_hotspot) v -= lse;
    p.hotspot_sample = gumbel_softmax(p.log_hotspot, noise.hotspot, 1, noise.temperature);
    p.hotspot_pooled = layers::max_pool(p.hotspot_sample, {1, cfg.hotspot_grid.h, cfg.hotspot_grid.w},
                                        {1, phi5.height(), phi5.width()}, &p.hotspot_argmax);
    p.hotspot_weights = cfg.normalize_attention ? normalize_slices(p.hotspot_pooled, 1) : p.hotspot_pooled;

    // Anticipation.
    p.pooled_features = attention_pooled_features(phi5, p.motor_weights5, p.hotspot_weights);
    const Eigen::VectorXd logits =
        params.classifier_w * (p.pooled_features - params.feature_center.col(0)) + params.classifier_b.col(0);
    p.action_logits.assign(logits.data(), logits.data() + logits.size());
    p.action_probs = p.action_logits;
    layers::softmax_inplace(p.action_probs);
    return p;
}

void backward(const ModelConfig& cfg, const ModelParams& params, const ForwardPass& p, const HeadGradients& upstream,
              ModelParams& grads) {
    const Tensor4& phi3 = p.features[kHotspotBlock];
    const Tensor4& phi5 = p.features[kActionBlock];
    std::array<Tensor4, kBlocks> grad_phi;
    for (int b = 0; b < kBlocks; ++b) {
        const Tensor4& f = p.features[b];
        grad_phi[static_cast<std::size_t>(b)] = Tensor4(f.channels(), f.frames(), f.height(), f.width());
    }

    // Classifier.
    const Eigen::Map<const Eigen::VectorXd> g_logits(upstream.action_logits.data(),
                                                     static_cast<Eigen::Index>(upstream.action_logits.size()));
    grads.classifier_w.noalias() += g_logits * (p.pooled_features - params.feature_center.col(0)).transpose();
    grads.classifier_b.col(0) += g_logits;
    const Eigen::VectorXd g_f = params.classifier_w.transpose() * g_logits;

    // Weighted pooling on phi5.
    const int C5 = phi5.channels(), T5 = phi5.frames(), S5 = phi5.height() * phi5.width();
    const double mscale = 1.0 / (T5 * S5);
    const double hscale = 1.0 / S5;
    std::vector<double> g_pooled5(p.motor_pooled5.size(), 0.0);
    std::vector<double> g_hpooled(p.hotspot_pooled.size(), 0.0);
    Tensor4& gphi5 = grad_phi[kActionBlock];
    for (int c = 0; c < C5; ++c) {
        const double* src = phi5.data() + static_cast<std::size_t>(c) * T5 * S5;
        double* dst = gphi5.data() + static_cast<std::size_t>(c) * T5 * S5;
        for (int i = 0; i < T5 * S5; ++i) {
            dst[i] += g_f(c) * mscale * p.motor_weights5[static_cast<std::size_t>(i)];
            g_pooled5[static_cast<std::size_t>(i)] += g_f(c) * mscale * src[i];
        }
        const int off = (T5 - 1) * S5;
        for (int s = 0; s < S5; ++s) {
            dst[off + s] += g_f(c) * hscale * p.hotspot_weights[static_cast<std::size_t>(s)];
            g_hpooled[static_cast<std::size_t>(s)] += g_f(c) * hscale * src[off + s];
        }
    }

    if (cfg.normalize_attention) {
        g_pooled5 = normalize_slices_backward(p.motor_pooled5, p.motor_weights5, g_pooled5, T5);
        g_hpooled = normalize_slices_backward(p.hotspot_pooled, p.hotspot_weights, g_hpooled, 1);
    }

    // Hotspot sample -> A logits.
    std::vector<double> g_hsample(p.hotspot_sample.size(), 0.0);
    layers::max_pool_backward(g_hpooled, p.hotspot_argmax, g_hsample);
    std::vector<double> g_za = gumbel_softmax_backward(p.hotspot_sample, g_hsample, 1, p.temperature);
    double sum_glog = 0.0;
    for (double g : g_za) sum_glog += g;
    for (std::size_t i = 0; i < g_za.size(); ++i) g_za[i] -= p.hotspot.probs[i] * sum_glog;
    if (!upstream.hotspot_probs.empty()) {
        std::vector<double> g_a = upstream.hotspot_probs;
        layers::softmax_backward_inplace(p.hotspot.probs, g_a);
        for (std::size_t i = 0; i < g_za.size(); ++i) g_za[i] += g_a[i];
    }

    // W_A conv and the motor-weighted phi3.
    Tensor4 g_za_t(1, 1, cfg.hotspot_grid.h, cfg.hotspot_grid.w);
    std::copy(g_za.begin(), g_za.end(), g_za_t.values().begin());
    Tensor4 g_hin(p.hotspot_input.channels(), 1, p.hotspot_input.height(), p.hotspot_input.width());
    layers::conv3d_backward(cfg.hotspot_geometry(), p.hotspot_columns, params.hotspot_w, g_za_t, grads.hotspot_w,
                            grads.hotspot_b, &g_hin);
    const int C3 = phi3.channels(), T3 = phi3.frames(), S3 = phi3.height() * phi3.width();
    const double scale3 = 1.0 / T3;
    std::vector<double> g_pooled3(p.motor_pooled3.size(), 0.0);
    Tensor4& gphi3 = grad_phi[kHotspotBlock];
    for (int c = 0; c < C3; ++c) {
        const double* src = phi3.data() + static_cast<std::size_t>(c) * T3 * S3;
        double* dst = gphi3.data() + static_cast<std::size_t>(c) * T3 * S3;
        const double* gh = g_hin.data() + static_cast<std::size_t>(c) * S3;
        for (int t = 0; t < T3; ++t) {
            for (int s = 0; s < S3; ++s) {
                const auto i = static_cast<std::size_t>(t * S3 + s);
                dst[i] += gh[s] * scale3 * p.motor_weights3[i];
                g_pooled3[i] += gh[s] * scale3 * src[i];
            }
        }
    }

    if (cfg.normalize_attention) g_pooled3 = normalize_slices_backward(p.motor_pooled3, p.motor_weights3, g_pooled3, T3);

    // Motor sample -> motor logits.
    std::vector<double> g_msample(p.motor_sample.size(), 0.0);
    layers::max_pool_backward(g_pooled3, p.motor_argmax3, g_msample);
    layers::max_pool_backward(g_pooled5, p.motor_argmax5, g_msample);
    std::vector<double> g_z = gumbel_softmax_backward(p.motor_sample, g_msample, cfg.motor_grid.t, p.temperature);
    double sum_glogpsi = 0.0;
    for (double g : g_z) sum_glogpsi += g;
    for (std::size_t i = 0; i < g_z.size(); ++i) g_z[i] -= p.motor.psi[i] * sum_glogpsi;
    if (!upstream.motor_probs.empty()) {
        std::vector<double> g_m = upstream.motor_probs;
        const auto n = static_cast<std::size_t>(cfg.motor_grid.slice_cells());
        for (int t = 0; t < cfg.motor_grid.t; ++t) {
            const auto off = static_cast<std::size_t>(t) * n;
            layers::softmax_backward_inplace(std::span<const double>(p.motor.probs).subspan(off, n),
                                             std::span<double>(g_m.data() + off, n));
        }
        for (std::size_t i = 0; i < g_z.size(); ++i) g_z[i] += g_m[i];
    }
    Tensor4 g_z_t(1, cfg.motor_grid.t, cfg.motor_grid.h, cfg.motor_grid.w);
    std::copy(g_z.begin(), g_z.end(), g_z_t.values().begin());
    Tensor4 g_phi2_head(p.features[kMotorBlock].channels(), cfg.motor_grid.t, cfg.motor_grid.h, cfg.motor_grid.w);
    layers::conv3d_backward(cfg.motor_geometry(), p.motor_columns, params.motor_w, g_z_t, grads.motor_w, grads.motor_b,
                            &g_phi2_head);
    {
        auto& dst = grad_phi[kMotorBlock].values();
        const auto& src = g_phi2_head.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }

    // Backbone.
    for (int b = kBlocks - 1; b >= 0; --b) {
        const auto i = static_cast<std::size_t>(b);
        Tensor4& g = grad_phi[i];
        layers::relu_backward_inplace(p.features[b], g);
        const Tensor4 g_conv = layers::instance_norm_backward(g, params.norm_gamma[i], p.backbone.norms[i],
                                                           grads.norm_gamma[i], grads.norm_beta[i]);
        if (b > 0) {
            Tensor4 g_in(p.features[b - 1].channels(), p.features[b - 1].frames(), p.features[b - 1].height(),
                         p.features[b - 1].width());
            layers::conv3d_backward(cfg.block_geometry(b), p.backbone.columns[i], params.conv_w[i], g_conv, grads.conv_w[i],
                                    grads.conv_b[i], &g_in);
            auto& dst = grad_phi[i - 1].values();
            const auto& src = g_in.values();
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        } else {
            layers::conv3d_backward(cfg.block_geometry(b), p.backbone.columns[i], params.conv_w[i], g_conv, grads.conv_w[i],
                                    grads.conv_b[i], nullptr);
        }
    }
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg), params_(ModelParams::initialize(cfg, seed)) {}

Model::Model(ModelConfig cfg, ModelParams params) : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    const ModelParams shape = ModelParams::zeros(cfg_);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> expected;
    shape.for_each([&](const std::string&, const Eigen::MatrixXd& m) { expected.emplace_back(m.rows(), m.cols()); });
    std::size_t k = 0;
    params_.for_each([&](const std::string& name, const Eigen::MatrixXd& m) {
        if (m.rows() != expected[k].first || m.cols() != expected[k].second) {
            throw Error("parameter " + name + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                        ", config expects " + std::to_string(expected[k].first) + "x" + std::to_string(expected[k].second));
        }
        ++k;
    });
}

}  // namespace motorattn::model
