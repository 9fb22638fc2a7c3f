#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motorattn/baselines.hpp"
#include "motorattn/model.hpp"
#include "motorattn/training.hpp"

namespace motorattn::report {

/// The evaluation metric set of one split.
struct SplitMetrics {
    int count = 0;
    double top1 = 0.0;
    double top5 = 0.0;
    double mean_class = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double kld = 0.0;
    double ade = 0.0;
    double fde = 0.0;
    double threshold_quantile = 0.75;
};

nlohmann::json to_json(const SplitMetrics& m);

/// Ground-truth hotspot map: the contact point rendered on the hotspot grid.
HotspotMap hotspot_ground_truth(const synth::VideoClip& clip, Grid2 grid, double sigma = 1.0);

/// Deterministic predictions over `examples`, scored against the clip ground truth.
SplitMetrics evaluate_split(const model::ModelConfig& cfg, const model::ModelParams& params,
                            std::span<const training::Example> examples, double threshold_quantile = 0.75);

struct BaselineRow {
    std::string method;
    std::optional<double> ade, fde;                    ///< trajectory baselines
    std::optional<double> precision, recall, f1, kld;  ///< hotspot baselines
    int count = 0;
};

nlohmann::json to_json(const BaselineRow& row);

struct BaselineOptions {
    int lstm_hidden = 64;
    baselines::LstmTrainConfig lstm;
    double threshold_quantile = 0.75;
};

/// Center prior on hotspots; Kalman, GP and LSTM (trained on the `train` ground-truth tracks) on
/// trajectories, scored like the model on the motor-grid time resolution. Clips without an
/// observed hand track are skipped by the trajectory baselines.
std::vector<BaselineRow> evaluate_baselines(const model::ModelConfig& cfg, std::span<const training::Example> train,
                                            std::span<const training::Example> eval, const BaselineOptions& options = {});

}  // namespace motorattn::report
