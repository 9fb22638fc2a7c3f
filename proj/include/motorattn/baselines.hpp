#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "motorattn/synth.hpp"
#include "motorattn/types.hpp"

namespace motorattn::baselines {

struct KalmanOptions {
    double process_noise = 1e-4;      ///< Q = q I on (position, velocity, acceleration)
    double measurement_noise = 1e-2;  ///< R = r
};

/// Constant-acceleration Kalman filter per axis, initialized exactly from the first three
/// observations, filtered over the rest and rolled forward without updates.
Trajectory kalman_forecast(std::span<const Point2> observed, int n_future, const KalmanOptions& options = {});

/// Zero-mean-residual GP regression of one scalar signal with an RBF kernel plus a noise term.
class GpRegressor {
public:
    struct Hyper {
        double length_scale = 4.0;
        double signal_variance = 1.0;
        double noise_variance = 1e-6;
    };

    /// Fits the hyperparameters by grid search over the log marginal likelihood.
    void fit(std::span<const double> times, std::span<const double> values);
    /// Conditions on the data with fixed hyperparameters.
    void condition(std::span<const double> times, std::span<const double> values, const Hyper& hyper);
    [[nodiscard]] double predict(double t) const;
    [[nodiscard]] const Hyper& hyper() const { return hyper_; }
    [[nodiscard]] double log_marginal_likelihood() const { return lml_; }

private:
    Hyper hyper_;
    double mean_ = 0.0;
    double lml_ = 0.0;
    std::vector<double> times_;
    Eigen::VectorXd alpha_;
};

/// Iterative one-step GP forecast per axis: predict, append, repeat.
Trajectory gpr_forecast(std::span<const Point2> observed, int n_future);

/// An observed track with the trajectory that follows it.
struct TrajectorySample {
    Trajectory observed;
    Trajectory future;
};

struct CorpusOptions {
    int observed = 16;
    int future = 8;
    double track_noise = 0.004;  ///< std of the noise added to observed points (tracker jitter)
    std::uint64_t seed = 0;
};

/// Hand paths of the scene generator (curved, constant speed) with noisy observed tracks.
std::vector<TrajectorySample> curved_trajectory_corpus(int count, const CorpusOptions& options = {});

struct LstmTrainConfig {
    int epochs = 60;
    int batch_size = 32;
    double learning_rate = 3e-3;
    std::uint64_t seed = 0;
};

/// Vanilla single-layer LSTM over observed displacements with autoregressive decoding.
class LstmForecaster {
public:
    explicit LstmForecaster(int hidden = 64);

    /// Adam on the mean squared position error of the decoded future; returns the final epoch loss.
    double train(std::span<const TrajectorySample> corpus, const LstmTrainConfig& cfg);
    [[nodiscard]] Trajectory forecast(std::span<const Point2> observed, int n_future) const;
    [[nodiscard]] bool trained() const { return trained_; }
    [[nodiscard]] int hidden() const { return hidden_; }

    void save(const std::filesystem::path& path) const;
    static LstmForecaster load(const std::filesystem::path& path);

    /// Mean squared error and its gradient with respect to every weight, for one batch.
    struct Weights {
        Eigen::MatrixXd wx, wh, b, wo, bo;
    };
    double loss_and_gradient(std::span<const TrajectorySample> batch, Weights* grad) const;
    Weights& weights() { return w_; }
    [[nodiscard]] const Weights& weights() const { return w_; }

private:
    int hidden_;
    bool trained_ = false;
    Weights w_;
};

/// lstm_forecast with the untrained-weights check.
Trajectory lstm_forecast(std::span<const Point2> observed, int n_future, const LstmForecaster& model);

/// Gaussian bump at the image centre.
HotspotMap center_prior(Grid2 grid, double sigma = 1.0);

}  // namespace motorattn::baselines
