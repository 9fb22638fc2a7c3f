#include "motorattn/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "motorattn/rng.hpp"

namespace motorattn::priors {

void PriorConfig::validate() const {
    if (!(sigma > 0.0)) throw Error("prior sigma must be positive");
    if (motor_grid.t < 1 || motor_grid.h < 1 || motor_grid.w < 1 || hotspot_grid.h < 1 || hotspot_grid.w < 1) {
        throw Error("prior grid dimensions must be >= 1");
    }
}

HotspotMap render_point_prior(Point2 point, Grid2 grid, double sigma) {
    if (!(sigma > 0.0)) throw Error("prior sigma must be positive");
    if (grid.h < 1 || grid.w < 1) throw Error("prior grid dimensions must be >= 1");
    const double px = std::clamp(point.x * grid.w, 0.5, grid.w - 0.5);
    const double py = std::clamp(point.y * grid.h, 0.5, grid.h - 0.5);
    HotspotMap out(grid);
    double max_exponent = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < grid.h; ++r) {
        for (int c = 0; c < grid.w; ++c) {
            const double dx = (c + 0.5) - px;
            const double dy = (r + 0.5) - py;
            out.at(r, c) = -(dx * dx + dy * dy) / (2.0 * sigma * sigma);
            max_exponent = std::max(max_exponent, out.at(r, c));
        }
    }
    double total = 0.0;
    for (double& v : out.probs) {
        v = std::exp(v - max_exponent);
        total += v;
    }
    for (double& v : out.probs) v /= total;
    return out;
}

Trajectory resample_trajectory(std::span<const Point2> traj, int n) {
    if (traj.empty()) throw Error("empty trajectory");
    if (n < 1) throw Error("resampled length must be >= 1");
    Trajectory out(static_cast<std::size_t>(n));
    const auto m = static_cast<int>(traj.size());
    if (n == 1) {
        out[0] = traj.back();
        return out;
    }
    for (int j = 0; j < n; ++j) {
        const double pos = static_cast<double>(j) * (m - 1) / (n - 1);
        const int i0 = std::min(static_cast<int>(std::floor(pos)), m - 1);
        const int i1 = std::min(i0 + 1, m - 1);
        const double f = pos - i0;
        out[static_cast<std::size_t>(j)] = {traj[i0].x + f * (traj[i1].x - traj[i0].x),
                                             traj[i0].y + f * (traj[i1].y - traj[i0].y)};
    }
    return out;
}

AttentionVolume render_trajectory_prior(std::span<const Point2> traj, Grid3 grid, double sigma) {
    const Trajectory points = resample_trajectory(traj, grid.t);
    AttentionVolume out(grid);
    const auto n = static_cast<std::size_t>(grid.slice_cells());
    for (int t = 0; t < grid.t; ++t) {
        const HotspotMap slice = render_point_prior(points[static_cast<std::size_t>(t)], grid.spatial(), sigma);
        std::copy(slice.probs.begin(), slice.probs.end(), out.probs.begin() + static_cast<std::ptrdiff_t>(t * n));
    }
    return out;
}

HotspotMap uniform_prior(Grid2 grid) {
    if (grid.h < 1 || grid.w < 1) throw Error("prior grid dimensions must be >= 1");
    return HotspotMap(grid, 1.0 / grid.cells());
}

AttentionVolume uniform_prior(Grid3 grid) {
    if (grid.t < 1 || grid.h < 1 || grid.w < 1) throw Error("prior grid dimensions must be >= 1");
    return AttentionVolume(grid, 1.0 / grid.slice_cells());
}

Point2 apply_homography(const Eigen::Matrix3d& h, Point2 p) {
    const Eigen::Vector3d q = h * Eigen::Vector3d(p.x, p.y, 1.0);
    return {q.x() / q.z(), q.y() / q.z()};
}

namespace {

void require_invertible(const Eigen::Matrix3d& h) {
    const double scale = std::max(h.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double det = h.determinant();
    if (!std::isfinite(det) || std::abs(det) <= 1e-12 * scale * scale * scale) {
        throw Error("non-invertible camera motion");
    }
}

}  // namespace

Trajectory project_trajectory(std::span<const Point2> points, std::span<const Eigen::Matrix3d> homographies) {
    if (points.size() != homographies.size()) {
        throw Error("project_trajectory needs one homography per future frame");
    }
    Trajectory out;
    out.reserve(points.size());
    Eigen::Matrix3d forward = Eigen::Matrix3d::Identity();
    for (std::size_t k = 0; k < points.size(); ++k) {
        require_invertible(homographies[k]);
        forward = homographies[k] * forward;
        out.push_back(apply_homography(forward.inverse(), points[k]));
    }
    return out;
}

Trajectory warp_trajectory(std::span<const Point2> points, std::span<const Eigen::Matrix3d> homographies) {
    if (points.size() != homographies.size()) {
        throw Error("warp_trajectory needs one homography per future frame");
    }
    Trajectory out;
    out.reserve(points.size());
    Eigen::Matrix3d forward = Eigen::Matrix3d::Identity();
    for (std::size_t k = 0; k < points.size(); ++k) {
        forward = homographies[k] * forward;
        out.push_back(apply_homography(forward, points[k]));
    }
    return out;
}

namespace {

// Similarity taking the centroid to the origin with mean distance sqrt(2).
Eigen::Matrix3d normalizing_transform(std::span<const Point2> pts) {
    double cx = 0.0, cy = 0.0;
    for (const auto& p : pts) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
    mean_dist /= static_cast<double>(pts.size());
    const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
    Eigen::Matrix3d t;
    t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
    return t;
}

Eigen::Matrix3d normalize_scale(Eigen::Matrix3d h) {
    if (std::abs(h(2, 2)) > 1e-12) return h / h(2, 2);
    return h / h.norm();
}

double reprojection_error(const Eigen::Matrix3d& h, Point2 src, Point2 dst) {
    const Point2 p = apply_homography(h, src);
    const double e = std::hypot(p.x - dst.x, p.y - dst.y);
    return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
}

bool collinear(Point2 a, Point2 b, Point2 c) {
    const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    const double scale = std::max({std::hypot(b.x - a.x, b.y - a.y), std::hypot(c.x - a.x, c.y - a.y), 1e-300});
    return std::abs(cross) <= 1e-9 * scale * scale;
}

}  // namespace

Eigen::Matrix3d fit_homography_dlt(std::span<const Point2> src, std::span<const Point2> dst) {
    if (src.size() != dst.size()) throw Error("homography fit needs matching correspondence lists");
    if (src.size() < 4) throw Error("homography fit needs at least 4 correspondences");
    const Eigen::Matrix3d ts = normalizing_transform(src);
    const Eigen::Matrix3d td = normalizing_transform(dst);
    const auto n = static_cast<Eigen::Index>(src.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Point2 p = apply_homography(ts, src[static_cast<std::size_t>(i)]);
        const Point2 q = apply_homography(td, dst[static_cast<std::size_t>(i)]);
        a.row(2 * i) << -p.x, -p.y, -1, 0, 0, 0, q.x * p.x, q.x * p.y, q.x;
        a.row(2 * i + 1) << 0, 0, 0, -p.x, -p.y, -1, q.y * p.x, q.y * p.y, q.y;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd v = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
    return normalize_scale(td.inverse() * hn * ts);
}

Eigen::Matrix3d estimate_homography(std::span<const Point2> src, std::span<const Point2> dst,
                                    const RansacOptions& options) {
    if (src.size() != dst.size()) throw Error("homography fit needs matching correspondence lists");
    if (src.size() < 4) throw Error("homography fit needs at least 4 correspondences");
    if (options.iterations < 1 || !(options.inlier_tolerance > 0.0)) throw Error("invalid RANSAC options");

    const std::size_t n = src.size();
    Rng rng(options.seed);
    std::vector<std::size_t> best_inliers;
    double best_error = std::numeric_limits<double>::infinity();
    std::vector<Point2> s4(4), d4(4);
    for (int it = 0; it < options.iterations; ++it) {
        std::size_t idx[4];
        for (int k = 0; k < 4; ++k) {
            bool fresh = false;
            while (!fresh) {
                idx[k] = static_cast<std::size_t>(rng.index(n));
                fresh = std::find(idx, idx + k, idx[k]) == idx + k;
            }
            s4[k] = src[idx[k]];
            d4[k] = dst[idx[k]];
        }
        if (collinear(s4[0], s4[1], s4[2]) || collinear(s4[0], s4[1], s4[3]) || collinear(s4[0], s4[2], s4[3]) ||
            collinear(s4[1], s4[2], s4[3])) {
            continue;
        }
        const Eigen::Matrix3d h = fit_homography_dlt(s4, d4);
        if (!h.allFinite()) continue;
        std::vector<std::size_t> inliers;
        double error = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = reprojection_error(h, src[i], dst[i]);
            if (e < options.inlier_tolerance) {
                inliers.push_back(i);
                error += e;
            }
        }
        if (inliers.size() > best_inliers.size() || (inliers.size() == best_inliers.size() && error < best_error)) {
            best_inliers = std::move(inliers);
            best_error = error;
        }
    }
    if (best_inliers.size() < 4) throw Error("no consensus set found");

    Eigen::Matrix3d h;
    // Refit, then re-collect inliers under the refined model once.
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<Point2> si, di;
        for (std::size_t i : best_inliers) {
            si.push_back(src[i]);
            di.push_back(dst[i]);
        }
        h = fit_homography_dlt(si, di);
        std::vector<std::size_t> refined;
        for (std::size_t i = 0; i < n; ++i) {
            if (reprojection_error(h, src[i], dst[i]) < options.inlier_tolerance) refined.push_back(i);
        }
        if (refined.size() < best_inliers.size()) break;
        best_inliers = std::move(refined);
    }
    return h;
}

Trajectory interpolate_trajectory(Point2 fingertip, Point2 hotspot, int n) {
    if (n < 2) throw Error("interpolation needs n >= 2");
    Trajectory out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double f = static_cast<double>(k) / (n - 1);
        out[static_cast<std::size_t>(k)] = {fingertip.x + f * (hotspot.x - fingertip.x),
                                             fingertip.y + f * (hotspot.y - fingertip.y)};
    }
    return out;
}

}  // namespace motorattn::priors
