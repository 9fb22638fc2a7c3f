#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "motorattn/types.hpp"

namespace motorattn::priors {

/// Construction parameters of the reference distributions Q(M|x) and Q(A|x).
struct PriorConfig {
    double sigma = 1.0;  ///< isotropic Gaussian std in grid cells
    Grid3 motor_grid{4, 16, 16};
    Grid2 hotspot_grid{8, 8};

    void validate() const;
};

/// Normalized Gaussian bump centred on `point` (cell units, truncated at the grid border).
/// Points on or beyond the border are clamped to the nearest boundary cell centre.
HotspotMap render_point_prior(Point2 point, Grid2 grid, double sigma);

/// Linear-in-time resampling to `n` points; the first and last input points are kept.
Trajectory resample_trajectory(std::span<const Point2> traj, int n);

/// One normalized Gaussian slice per resampled trajectory point.
AttentionVolume render_trajectory_prior(std::span<const Point2> traj, Grid3 grid, double sigma);

HotspotMap uniform_prior(Grid2 grid);
AttentionVolume uniform_prior(Grid3 grid);

Point2 apply_homography(const Eigen::Matrix3d& h, Point2 p);

/// Maps future points into the last observable frame. `points[k]` is expressed in frame k+1
/// counted from the last observable frame, `homographies[k]` maps frame k to frame k+1.
Trajectory project_trajectory(std::span<const Point2> points, std::span<const Eigen::Matrix3d> homographies);

/// Forward warp matching `project_trajectory`: last-frame points into their own future frames.
Trajectory warp_trajectory(std::span<const Point2> points, std::span<const Eigen::Matrix3d> homographies);

/// Normalized direct linear transform on >= 4 correspondences (least squares when more).
Eigen::Matrix3d fit_homography_dlt(std::span<const Point2> src, std::span<const Point2> dst);

struct RansacOptions {
    int iterations = 500;
    double inlier_tolerance = 1.0;  ///< reprojection error in the units of the input points
    std::uint64_t seed = 0;
};

/// RANSAC over 4-point DLT fits followed by a least-squares refit on the consensus set.
Eigen::Matrix3d estimate_homography(std::span<const Point2> src, std::span<const Point2> dst,
                                    const RansacOptions& options = {});

/// `n` equally spaced points from `fingertip` to `hotspot` inclusive.
Trajectory interpolate_trajectory(Point2 fingertip, Point2 hotspot, int n);

}  // namespace motorattn::priors
