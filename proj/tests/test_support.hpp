#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "motorattn/model.hpp"
#include "motorattn/rng.hpp"

namespace testsupport {

/// A tiny network whose grids mirror the default attachment scheme at 4x4 / 4x8x8 resolution.
inline motorattn::model::ModelConfig tiny_config(int num_actions = 3) {
    motorattn::model::ModelConfig cfg;
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

inline motorattn::Tensor4 random_tensor(int c, int t, int h, int w, motorattn::Rng& rng, double lo = -1.0,
                                        double hi = 1.0) {
    motorattn::Tensor4 x(c, t, h, w);
    for (double& v : x.values()) v = rng.uniform(lo, hi);
    return x;
}

inline std::vector<double> random_distribution(std::size_t n, motorattn::Rng& rng) {
    std::vector<double> p(n);
    double s = 0.0;
    for (double& v : p) s += (v = rng.uniform(0.05, 1.0));
    for (double& v : p) v /= s;
    return p;
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("motorattn_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testsupport
