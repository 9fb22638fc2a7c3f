#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "motorattn/tensor.hpp"

namespace motorattn::layers {

struct ConvGeometry {
    int in_channels = 1;
    int out_channels = 1;
    std::array<int, 3> kernel{3, 3, 3};
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> padding{1, 1, 1};

    [[nodiscard]] Grid3 output_grid(Grid3 in) const;
    [[nodiscard]] int patch_size() const { return in_channels * kernel[0] * kernel[1] * kernel[2]; }
};

/// Unfolds every receptive field of `in` into a column: (in_channels * kT * kH * kW) x output positions.
void im2col(const ConvGeometry& g, const Tensor4& in, RowMatrix& columns);

/// Scatter-adds columns back onto an input-shaped gradient.
void col2im(const ConvGeometry& g, const RowMatrix& columns, Tensor4& grad_in);

/// weight: out_channels x patch_size, bias: out_channels x 1. `columns` receives the unfolded input.
Tensor4 conv3d_forward(const ConvGeometry& g, const Tensor4& in, const Eigen::MatrixXd& weight,
                       const Eigen::MatrixXd& bias, RowMatrix& columns);

/// Accumulates into grad_weight / grad_bias; writes grad_in when non-null.
void conv3d_backward(const ConvGeometry& g, const RowMatrix& columns, const Eigen::MatrixXd& weight,
                     const Tensor4& grad_out, Eigen::MatrixXd& grad_weight, Eigen::MatrixXd& grad_bias,
                     Tensor4* grad_in);

/// Per-sample, per-channel normalization over (T, H, W), followed by a per-channel affine map.
struct NormCache {
    Eigen::VectorXd inv_std;
    Tensor4 normalized;
};

inline constexpr double kNormEpsilon = 1e-5;

Tensor4 instance_norm_forward(const Tensor4& in, const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& beta,
                              NormCache& cache);
Tensor4 instance_norm_backward(const Tensor4& grad_out, const Eigen::MatrixXd& gamma, const NormCache& cache,
                               Eigen::MatrixXd& grad_gamma, Eigen::MatrixXd& grad_beta);

void relu_inplace(Tensor4& x);
/// Zeroes gradient entries whose forward output was not positive.
void relu_backward_inplace(const Tensor4& output, Tensor4& grad);

/// Non-overlapping max pooling of a single-channel volume; `argmax` records the winning source
/// index of every output cell (first index on ties).
std::vector<double> max_pool(std::span<const double> in, Grid3 from, Grid3 to, std::vector<int>* argmax = nullptr);
void max_pool_backward(std::span<const double> grad_out, std::span<const int> argmax, std::span<double> grad_in);

/// Softmax of `values` in place; returns log of the normalizer.
double softmax_inplace(std::span<double> values);

/// Backpropagates through y = softmax(x): returns y * (g - <y, g>) into `grad`.
void softmax_backward_inplace(std::span<const double> y, std::span<double> grad);

}  // namespace motorattn::layers
