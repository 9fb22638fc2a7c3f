#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "motorattn/types.hpp"

namespace motorattn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Eigen's vectorized reductions peel to the first aligned address, so the summation order (and
/// the last bits of the result) depends on where a buffer lands. Aligned storage keeps runs
/// bit-reproducible.
using AlignedVector = std::vector<double, Eigen::aligned_allocator<double>>;

/// Feature volume stored channel-major: index ((c * T + t) * H + h) * W + w.
class Tensor4 {
public:
    Tensor4() = default;
    Tensor4(int channels, int frames, int height, int width, double fill = 0.0)
        : c_(channels), t_(frames), h_(height), w_(width),
          data_(static_cast<std::size_t>(channels) * frames * height * width, fill) {}

    [[nodiscard]] int channels() const { return c_; }
    [[nodiscard]] int frames() const { return t_; }
    [[nodiscard]] int height() const { return h_; }
    [[nodiscard]] int width() const { return w_; }
    [[nodiscard]] Grid3 grid() const { return {t_, h_, w_}; }
    [[nodiscard]] int positions() const { return t_ * h_ * w_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] bool same_shape(const Tensor4& o) const {
        return c_ == o.c_ && t_ == o.t_ && h_ == o.h_ && w_ == o.w_;
    }

    double& at(int c, int t, int h, int w) { return data_[index(c, t, h, w)]; }
    [[nodiscard]] double at(int c, int t, int h, int w) const { return data_[index(c, t, h, w)]; }

    double* data() { return data_.data(); }
    [[nodiscard]] const double* data() const { return data_.data(); }
    AlignedVector& values() { return data_; }
    [[nodiscard]] const AlignedVector& values() const { return data_; }

    /// channels x positions view.
    Eigen::Map<RowMatrix> matrix() { return {data_.data(), c_, positions()}; }
    [[nodiscard]] Eigen::Map<const RowMatrix> matrix() const { return {data_.data(), c_, positions()}; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

private:
    [[nodiscard]] std::size_t index(int c, int t, int h, int w) const {
        return static_cast<std::size_t>(((c * t_ + t) * h_ + h) * w_ + w);
    }

    int c_ = 0, t_ = 0, h_ = 0, w_ = 0;
    AlignedVector data_;
};

}  // namespace motorattn
