#pragma once

#include <span>
#include <vector>

#include "motorattn/types.hpp"

namespace motorattn::metrics {

/// Fraction of samples whose label is among the k most probable classes (ties go to the lower
/// class index).
double topk_accuracy(std::span<const std::vector<double>> preds, std::span<const int> labels, int k);

/// Unweighted mean of per-class top-1 recall over classes that occur in `labels`.
double mean_class_accuracy(std::span<const std::vector<double>> preds, std::span<const int> labels);

/// Linear-interpolation quantile of `values` (q in [0,1]).
double quantile(std::span<const double> values, double q);

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double pred_threshold = 0.0;
    double gt_threshold = 0.0;
};

/// Binarizes each map at the `threshold_quantile` of its own values (cells strictly above are
/// positive) and scores the predicted set against the ground-truth set. Empty predicted sets
/// score zero.
PrecisionRecall hotspot_prf(const HotspotMap& pred, const HotspotMap& gt, double threshold_quantile = 0.75);

enum class KldDirection { gt_to_pred, pred_to_gt };

/// KL(gt || pred) after renormalizing both maps, entries clamped at 1e-12.
double heatmap_kld(const HotspotMap& pred, const HotspotMap& gt, KldDirection direction = KldDirection::gt_to_pred);

/// Row-major index of the largest entry of slice `t`; the smallest index wins ties.
int argmax_cell(const AttentionVolume& vol, int t);
int argmax_cell(const HotspotMap& map);

struct DisplacementErrors {
    double ade = 0.0;
    double fde = 0.0;
    std::vector<double> per_slice;
};

/// Distances between the argmax cell centre of every slice and the ground truth resampled to
/// the number of slices.
DisplacementErrors trajectory_errors(const AttentionVolume& pred, std::span<const Point2> gt);

/// The same errors for a point forecast against a ground-truth trajectory of equal length.
DisplacementErrors displacement_errors(std::span<const Point2> pred, std::span<const Point2> gt);

}  // namespace motorattn::metrics
