#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "motorattn/layers.hpp"
#include "motorattn/rng.hpp"
#include "motorattn/synth.hpp"
#include "motorattn/tensor.hpp"
#include "motorattn/types.hpp"

namespace motorattn::model {

inline constexpr int kBlocks = 5;
inline constexpr int kMotorBlock = 1;    // phi2
inline constexpr int kHotspotBlock = 2;  // phi3
inline constexpr int kActionBlock = 4;   // phi5

struct ModelConfig {
    int frames = 16;
    int height = 64;
    int width = 64;
    int in_channels = 3;
    std::array<int, kBlocks> channels{8, 16, 32, 64, 64};
    std::array<std::array<int, 3>, kBlocks> strides{{{2, 2, 2}, {2, 2, 2}, {1, 2, 2}, {1, 2, 2}, {1, 1, 1}}};
    int kernel = 3;       ///< cubic backbone kernel
    int head_kernel = 3;  ///< spatial kernel of W_M (also temporal) and W_A
    Grid3 motor_grid{4, 16, 16};
    Grid2 hotspot_grid{8, 8};
    int num_actions = 12;
    /// Rescale each pooled attention slice to mean one before weighting features, so the weights
    /// redistribute rather than rescale the features (a uniform map gives plain average pooling).
    bool normalize_attention = true;

    /// Throws unless block shapes, head attachment grids and pooling factors are consistent.
    void validate() const;
    [[nodiscard]] std::array<Grid3, kBlocks> block_grids() const;
    [[nodiscard]] layers::ConvGeometry block_geometry(int block) const;
    [[nodiscard]] layers::ConvGeometry motor_geometry() const;
    [[nodiscard]] layers::ConvGeometry hotspot_geometry() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

/// All learnable arrays. Biases are stored as n x 1 matrices.
struct ModelParams {
    std::array<Eigen::MatrixXd, kBlocks> conv_w, conv_b, norm_gamma, norm_beta;
    Eigen::MatrixXd motor_w, motor_b;            ///< W_M: 3D conv on phi2 -> 1 channel
    Eigen::MatrixXd hotspot_w, hotspot_b;        ///< W_A: 2D conv on the weighted phi3 -> 1 channel
    Eigen::MatrixXd classifier_w, classifier_b;  ///< W_P: num_actions x C5
    Eigen::MatrixXd feature_center;              ///< running mean of the pooled features, C5 x 1 (not trained)

    /// Zero-valued arrays shaped for `cfg`.
    static ModelParams zeros(const ModelConfig& cfg);
    /// He-initialized backbone and attention heads, zero classifier, unit norm scales, zero biases.
    static ModelParams initialize(const ModelConfig& cfg, std::uint64_t seed);

    template <typename F>
    void for_each(F&& f) {
        for (int b = 0; b < kBlocks; ++b) {
            const std::string p = "block" + std::to_string(b + 1) + ".";
            f(p + "conv.weight", conv_w[b]);
            f(p + "conv.bias", conv_b[b]);
            f(p + "norm.gamma", norm_gamma[b]);
            f(p + "norm.beta", norm_beta[b]);
        }
        f(std::string("motor.weight"), motor_w);
        f(std::string("motor.bias"), motor_b);
        f(std::string("hotspot.weight"), hotspot_w);
        f(std::string("hotspot.bias"), hotspot_b);
        f(std::string("classifier.weight"), classifier_w);
        f(std::string("classifier.bias"), classifier_b);
        f(std::string("classifier.center"), feature_center);
    }

    /// Arrays maintained by running statistics rather than by gradient steps.
    static bool is_buffer(const std::string& name) { return name.ends_with(".center"); }

    template <typename F>
    void for_each(F&& f) const {
        const_cast<ModelParams*>(this)->for_each(
            [&](const std::string& name, Eigen::MatrixXd& m) { f(name, static_cast<const Eigen::MatrixXd&>(m)); });
    }

    void set_zero();
    [[nodiscard]] bool all_finite() const;
    /// FNV-1a digest over every parameter's bytes.
    [[nodiscard]] std::string checksum() const;
    [[nodiscard]] std::size_t count() const;
};

bool operator==(const ModelParams& a, const ModelParams& b);

/// Backbone outputs phi1..phi5 (index 0..4).
struct FeaturePyramid {
    std::array<Tensor4, kBlocks> phi;

    const Tensor4& operator[](int i) const { return phi[static_cast<std::size_t>(i)]; }
};

struct GumbelConfig {
    double temperature = 2.0;
    bool noise_enabled = true;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// Channel-major network input from a clip (frames x H x W x C -> C x frames x H x W).
Tensor4 clip_to_tensor(const synth::VideoClip& clip);

struct BackboneCache {
    std::array<RowMatrix, kBlocks> columns;
    std::array<layers::NormCache, kBlocks> norms;
};

FeaturePyramid backbone_forward(const ModelConfig& cfg, const ModelParams& params, const Tensor4& x,
                                BackboneCache* cache = nullptr);

/// psi = softmax over every cell of the linear 3D conv of phi2; probs = psi renormalized per slice.
AttentionVolume motor_head(const Tensor4& phi2, const Eigen::MatrixXd& weight, const Eigen::MatrixXd& bias,
                           const layers::ConvGeometry& geometry, Grid3 grid);

/// Per-slice softmax((log_probs + noise) / temperature); `noise` may be empty (no noise).
std::vector<double> gumbel_softmax(std::span<const double> log_probs, std::span<const double> noise, int slices,
                                   double temperature);

/// Gradient with respect to the log-probabilities given the sample and dL/dsample.
std::vector<double> gumbel_softmax_backward(std::span<const double> sample, std::span<const double> grad_sample,
                                            int slices, double temperature);

std::vector<double> draw_gumbel_noise(std::size_t n, Rng& rng);

/// Sample M~ from psi (clamped at 1e-12 before the log). Noise comes from `rng` when enabled.
AttentionVolume gumbel_sample(const AttentionVolume& motor, const GumbelConfig& cfg, Rng& rng);
/// Same with caller-provided noise (empty for none).
AttentionVolume gumbel_sample(const AttentionVolume& motor, double temperature, std::span<const double> noise);
/// Gradient of a loss with respect to psi through `gumbel_sample`.
std::vector<double> gumbel_sample_backward_psi(const AttentionVolume& motor, const AttentionVolume& sample,
                                               std::span<const double> grad_sample, double temperature);

HotspotMap hotspot_sample(const HotspotMap& hotspot, const GumbelConfig& cfg, Rng& rng);
HotspotMap hotspot_sample(const HotspotMap& hotspot, double temperature, std::span<const double> noise);

/// Max pooling over non-overlapping windows; the result is not renormalized.
AttentionVolume pool_attention(const AttentionVolume& att, Grid3 target);
HotspotMap pool_attention(const HotspotMap& att, Grid2 target);

/// Each of `slices` equal slices scaled to mean one.
std::vector<double> normalize_slices(std::span<const double> weights, int slices);

/// p(A | M~, x): softmax of W_A applied to the time-averaged, attention-weighted phi3.
HotspotMap hotspot_head(const Tensor4& phi3, const AttentionVolume& pooled_motor, const Eigen::MatrixXd& weight,
                        const Eigen::MatrixXd& bias, const layers::ConvGeometry& geometry, bool normalize = false);

/// softmax(W_P avg(M~ * phi5) + W_P avg(A~ * phi5[last]) + b).
std::vector<double> anticipation_head(const Tensor4& phi5, const AttentionVolume& pooled_motor,
                                      const HotspotMap& pooled_hotspot, const Eigen::MatrixXd& weight,
                                      const Eigen::MatrixXd& bias, bool normalize = false);

/// Gumbel noise for one forward pass; empty vectors mean the deterministic path.
struct SamplingNoise {
    double temperature = 1.0;
    std::vector<double> motor;
    std::vector<double> hotspot;

    static SamplingNoise deterministic() { return {}; }
    static SamplingNoise draw(const ModelConfig& cfg, const GumbelConfig& gumbel, Rng& rng);
};

/// Every intermediate of one sample's forward pass, kept for backpropagation.
struct ForwardPass {
    BackboneCache backbone;
    FeaturePyramid features;
    RowMatrix motor_columns;
    std::vector<double> motor_logits;
    std::vector<double> log_psi;
    AttentionVolume motor;  ///< psi and M
    std::vector<double> motor_sample;
    std::vector<double> motor_pooled3, motor_pooled5;
    std::vector<double> motor_weights3, motor_weights5;  ///< pooled samples as applied to the features
    std::vector<int> motor_argmax3, motor_argmax5;
    Tensor4 hotspot_input;
    RowMatrix hotspot_columns;
    std::vector<double> log_hotspot;
    HotspotMap hotspot;  ///< A
    std::vector<double> hotspot_sample;
    std::vector<double> hotspot_pooled;
    std::vector<double> hotspot_weights;
    std::vector<int> hotspot_argmax;
    Eigen::VectorXd pooled_features;
    std::vector<double> action_logits;
    std::vector<double> action_probs;
    double temperature = 1.0;
};

ForwardPass forward(const ModelConfig& cfg, const ModelParams& params, const Tensor4& x, const SamplingNoise& noise);

/// Upstream gradients: dL/d(action logits), dL/dM and dL/dA (either of the latter may be empty).
struct HeadGradients {
    std::vector<double> action_logits;
    std::vector<double> motor_probs;
    std::vector<double> hotspot_probs;
};

/// Accumulates parameter gradients of one sample into `grads`.
void backward(const ModelConfig& cfg, const ModelParams& params, const ForwardPass& pass,
              const HeadGradients& upstream, ModelParams& grads);

/// Bundles config and parameters.
class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed);
    Model(ModelConfig cfg, ModelParams params);

    [[nodiscard]] const ModelConfig& config() const { return cfg_; }
    [[nodiscard]] const ModelParams& params() const { return params_; }
    ModelParams& params() { return params_; }

private:
    ModelConfig cfg_;
    ModelParams params_;
};

}  // namespace motorattn::model
