#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motorattn/model.hpp"
#include "motorattn/synth.hpp"
#include "motorattn/types.hpp"

namespace motorattn::training {

struct TrainConfig {
    double learning_rate = 1e-2;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch_size = 16;
    int epochs = 10;
    bool cosine_decay = true;
    double lambda_motor = 1.0;
    double lambda_hotspot = 1.0;
    double temperature = 2.0;  ///< constant Gumbel temperature during training
    bool augment_flip = false;  ///< random horizontal flips of frames and both priors
    double grad_clip = 5.0;     ///< rescale the batch gradient to this global norm when larger (0 = off)
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

/// sum p log(p / q) with both arguments clamped at 1e-12.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double kl_divergence(const HotspotMap& p, const HotspotMap& q);
/// Mean of the per-slice divergences.
double kl_divergence(const AttentionVolume& p, const AttentionVolume& q);

struct LossTerms {
    double cross_entropy = 0.0;
    double kl_motor = 0.0;
    double kl_hotspot = 0.0;
    double total = 0.0;
};

/// -log p[y] + lambda_A KL(A || Q_A) + lambda_M KL(M || Q_M).
LossTerms loss(std::span<const double> action_probs, int label, const AttentionVolume& motor,
               const AttentionVolume& motor_prior, const HotspotMap& hotspot, const HotspotMap& hotspot_prior,
               double lambda_motor, double lambda_hotspot);

/// Upstream gradients of `loss` for a forward pass (weights of zero leave the KL gradients empty).
model::HeadGradients loss_gradients(const model::ForwardPass& pass, int label, const AttentionVolume& motor_prior,
                                    const HotspotMap& hotspot_prior, double lambda_motor, double lambda_hotspot);

/// One clip with its reference distributions.
struct Example {
    synth::VideoClip clip;
    AttentionVolume motor_prior;
    HotspotMap hotspot_prior;
    bool annotated = false;  ///< false when the priors are the uniform fallback
};

struct Dataset {
    std::vector<Example> train;
    std::vector<Example> val;
    int num_actions = 0;
};

/// Loads every clip listed in `dir/manifest.json`. Clips without a priors file get uniform priors.
Dataset load_dataset(const std::filesystem::path& dir, const model::ModelConfig& cfg);

/// Horizontal mirror of the clip frames and both priors.
Example flip_horizontal(const Example& ex);

struct EpochRecord {
    int epoch = 0;
    double learning_rate = 0.0;
    LossTerms train_loss;
    double train_top1 = 0.0;
    LossTerms val_loss;
    double val_top1 = 0.0;
    double wall_seconds = 0.0;
};

nlohmann::json to_json(const EpochRecord& r);

/// Raised when the loss stops being finite.
class DivergenceError : public Error {
public:
    using Error::Error;
};

struct Checkpoint {
    model::ModelConfig config;
    model::ModelParams params;
    int epoch = 0;                                ///< completed epochs
    std::optional<model::ModelParams> velocity;   ///< optimizer state, if saved for resuming
    std::optional<TrainConfig> train_config;
    double best_val_top1 = -1.0;
};

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
void save_checkpoint(const model::ModelParams& params, const model::ModelConfig& cfg, const std::filesystem::path& path);
/// Validates shapes; when `expected` is given the stored config must be compatible with it.
Checkpoint load_checkpoint(const std::filesystem::path& path, const model::ModelConfig* expected = nullptr);

struct TrainOptions {
    std::filesystem::path log_path;         ///< JSON lines, one record per epoch (optional)
    std::filesystem::path checkpoint_path;  ///< best-val checkpoint; "<path>.last" holds the resumable state
    std::optional<Checkpoint> resume;       ///< continue from this state
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    model::ModelParams params;       ///< parameters after the last epoch
    model::ModelParams best_params;  ///< parameters of the best validation epoch
    int best_epoch = 0;
    std::vector<EpochRecord> history;
};

/// Mean loss terms and top-1 accuracy over `examples` on the deterministic path.
std::pair<LossTerms, double> evaluate_loss(const model::ModelConfig& cfg, const model::ModelParams& params,
                                           std::span<const Example> examples, const TrainConfig& tcfg);

TrainResult train(const Dataset& data, const model::ModelConfig& cfg, const TrainConfig& tcfg,
                  const TrainOptions& options = {});

}  // namespace motorattn::training
