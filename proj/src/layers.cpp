#include "motorattn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace motorattn::layers {

Grid3 ConvGeometry::output_grid(Grid3 in) const {
    auto out_dim = [](int n, int k, int s, int p) { return (n + 2 * p - k) / s + 1; };
    return {out_dim(in.t, kernel[0], stride[0], padding[0]), out_dim(in.h, kernel[1], stride[1], padding[1]),
            out_dim(in.w, kernel[2], stride[2], padding[2])};
}

void im2col(const ConvGeometry& g, const Tensor4& in, RowMatrix& columns) {
    const Grid3 out = g.output_grid(in.grid());
    const int T = in.frames(), H = in.height(), W = in.width();
    const int kt = g.kernel[0], kh = g.kernel[1], kw = g.kernel[2];
    const int st = g.stride[0], sh = g.stride[1], sw = g.stride[2];
    const int pt = g.padding[0], ph = g.padding[1], pw = g.padding[2];
    columns.resize(g.patch_size(), out.cells());
    const double* src = in.data();
    int row = 0;
    for (int c = 0; c < g.in_channels; ++c) {
        for (int dt = 0; dt < kt; ++dt) {
            for (int dh = 0; dh < kh; ++dh) {
                for (int dw = 0; dw < kw; ++dw, ++row) {
                    double* dst = columns.row(row).data();
                    int col = 0;
                    for (int ot = 0; ot < out.t; ++ot) {
                        const int it = ot * st - pt + dt;
                        for (int oh = 0; oh < out.h; ++oh) {
                            const int ih = oh * sh - ph + dh;
                            const bool valid_th = it >= 0 && it < T && ih >= 0 && ih < H;
                            const double* line = valid_th ? src + ((static_cast<std::ptrdiff_t>(c) * T + it) * H + ih) * W : nullptr;
                            for (int ow = 0; ow < out.w; ++ow, ++col) {
                                const int iw = ow * sw - pw + dw;
                                dst[col] = (valid_th && iw >= 0 && iw < W) ? line[iw] : 0.0;
                            }
                        }
                    }
                }
            }
        }
    }
}

void col2im(const ConvGeometry& g, const RowMatrix& columns, Tensor4& grad_in) {
    const Grid3 out = g.output_grid(grad_in.grid());
    const int T = grad_in.frames(), H = grad_in.height(), W = grad_in.width();
    const int kt = g.kernel[0], kh = g.kernel[1], kw = g.kernel[2];
    const int st = g.stride[0], sh = g.stride[1], sw = g.stride[2];
    const int pt = g.padding[0], ph = g.padding[1], pw = g.padding[2];
    double* dst = grad_in.data();
    int row = 0;
    for (int c = 0; c < g.in_channels; ++c) {
        for (int dt = 0; dt < kt; ++dt) {
            for (int dh = 0; dh < kh; ++dh) {
                for (int dw = 0; dw < kw; ++dw, ++row) {
                    const double* srcrow = columns.row(row).data();
                    int col = 0;
                    for (int ot = 0; ot < out.t; ++ot) {
                        const int it = ot * st - pt + dt;
                        for (int oh = 0; oh < out.h; ++oh) {
                            const int ih = oh * sh - ph + dh;
                            if (it < 0 || it >= T || ih < 0 || ih >= H) {
                                col += out.w;
                                continue;
                            }
                            double* line = dst + ((static_cast<std::ptrdiff_t>(c) * T + it) * H + ih) * W;
                            for (int ow = 0; ow < out.w; ++ow, ++col) {
                                const int iw = ow * sw - pw + dw;
                                if (iw >= 0 && iw < W) line[iw] += srcrow[col];
                            }
                        }
                    }
                }
            }
        }
    }
}

Tensor4 conv3d_forward(const ConvGeometry& g, const Tensor4& in, const Eigen::MatrixXd& weight,
                       const Eigen::MatrixXd& bias, RowMatrix& columns) {
    if (in.channels() != g.in_channels) throw Error("conv3d: input channel mismatch");
    im2col(g, in, columns);
    const Grid3 out_grid = g.output_grid(in.grid());
    Tensor4 out(g.out_channels, out_grid.t, out_grid.h, out_grid.w);
    auto m = out.matrix();
    m.noalias() = weight * columns;
    m.colwise() += bias.col(0);
    return out;
}

void conv3d_backward(const ConvGeometry& g, const RowMatrix& columns, const Eigen::MatrixXd& weight,
                     const Tensor4& grad_out, Eigen::MatrixXd& grad_weight, Eigen::MatrixXd& grad_bias,
                     Tensor4* grad_in) {
    const auto go = grad_out.matrix();
    grad_weight.noalias() += go * columns.transpose();
    grad_bias.col(0) += go.rowwise().sum();
    if (grad_in != nullptr) {
        RowMatrix grad_columns = weight.transpose() * go;
        grad_in->fill(0.0);
        col2im(g, grad_columns, *grad_in);
    }
}

Tensor4 instance_norm_forward(const Tensor4& in, const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& beta,
                              NormCache& cache) {
    const auto x = in.matrix();
    const double n = static_cast<double>(x.cols());
    const Eigen::VectorXd mean = x.rowwise().sum() / n;
    cache.normalized = Tensor4(in.channels(), in.frames(), in.height(), in.width());
    auto xn = cache.normalized.matrix();
    xn = x.colwise() - mean;
    const Eigen::VectorXd var = xn.array().square().rowwise().sum() / n;
    cache.inv_std = (var.array() + kNormEpsilon).rsqrt();
    xn = xn.array().colwise() * cache.inv_std.array();
    Tensor4 out(in.channels(), in.frames(), in.height(), in.width());
    auto y = out.matrix();
    y = (xn.array().colwise() * gamma.col(0).array()).colwise() + beta.col(0).array();
    return out;
}

Tensor4 instance_norm_backward(const Tensor4& grad_out, const Eigen::MatrixXd& gamma, const NormCache& cache,
                               Eigen::MatrixXd& grad_gamma, Eigen::MatrixXd& grad_beta) {
    const auto dy = grad_out.matrix();
    const auto xn = cache.normalized.matrix();
    grad_gamma.col(0) += (dy.array() * xn.array()).rowwise().sum().matrix();
    grad_beta.col(0) += dy.rowwise().sum();
    RowMatrix dxn = dy.array().colwise() * gamma.col(0).array();
    const double n = static_cast<double>(dy.cols());
    const Eigen::VectorXd sum_dxn = dxn.rowwise().sum();
    const Eigen::VectorXd sum_dxn_xn = (dxn.array() * xn.array()).rowwise().sum();
    Tensor4 grad_in(grad_out.channels(), grad_out.frames(), grad_out.height(), grad_out.width());
    auto dx = grad_in.matrix();
    dx = ((n * dxn.array()).colwise() - sum_dxn.array() - xn.array().colwise() * sum_dxn_xn.array()).colwise() *
         (cache.inv_std.array() / n);
    return grad_in;
}

void relu_inplace(Tensor4& x) {
    for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const Tensor4& output, Tensor4& grad) {
    const auto& y = output.values();
    auto& g = grad.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(y[i] > 0.0)) g[i] = 0.0;
    }
}

std::vector<double> max_pool(std::span<const double> in, Grid3 from, Grid3 to, std::vector<int>* argmax) {
    if (to.t < 1 || to.h < 1 || to.w < 1 || from.t % to.t != 0 || from.h % to.h != 0 || from.w % to.w != 0) {
        throw Error("pool_attention: target grid must evenly divide the source grid");
    }
    if (in.size() != static_cast<std::size_t>(from.cells())) throw Error("pool_attention: size mismatch");
    const int ft = from.t / to.t, fh = from.h / to.h, fw = from.w / to.w;
    std::vector<double> out(static_cast<std::size_t>(to.cells()));
    if (argmax != nullptr) argmax->assign(out.size(), 0);
    for (int t = 0; t < to.t; ++t) {
        for (int h = 0; h < to.h; ++h) {
            for (int w = 0; w < to.w; ++w) {
                double best = -std::numeric_limits<double>::infinity();
                int best_idx = -1;
                for (int dt = 0; dt < ft; ++dt) {
                    for (int dh = 0; dh < fh; ++dh) {
                        for (int dw = 0; dw < fw; ++dw) {
                            const int idx = ((t * ft + dt) * from.h + (h * fh + dh)) * from.w + (w * fw + dw);
                            if (best_idx < 0 || in[static_cast<std::size_t>(idx)] > best) {
                                best = in[static_cast<std::size_t>(idx)];
                                best_idx = idx;
                            }
                        }
                    }
                }
                const auto o = static_cast<std::size_t>((t * to.h + h) * to.w + w);
                out[o] = best;
                if (argmax != nullptr) (*argmax)[o] = best_idx;
            }
        }
    }
    return out;
}

void max_pool_backward(std::span<const double> grad_out, std::span<const int> argmax, std::span<double> grad_in) {
    for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[static_cast<std::size_t>(argmax[i])] += grad_out[i];
}

double softmax_inplace(std::span<double> values) {
    const double m = *std::max_element(values.begin(), values.end());
    double total = 0.0;
    for (double& v : values) {
        v = std::exp(v - m);
        total += v;
    }
    for (double& v : values) v /= total;
    return m + std::log(total);
}

void softmax_backward_inplace(std::span<const double> y, std::span<double> grad) {
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * grad[i];
    for (std::size_t i = 0; i < y.size(); ++i) grad[i] = y[i] * (grad[i] - dot);
}

}  // namespace motorattn::layers
