#include "motorattn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "motorattn/priors.hpp"

namespace motorattn::metrics {

namespace {

void check_inputs(std::span<const std::vector<double>> preds, std::span<const int> labels) {
    if (preds.empty()) throw Error("metrics: empty input");
    if (preds.size() != labels.size()) throw Error("metrics: predictions and labels differ in length");
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= preds[i].size()) {
            throw Error("metrics: label " + std::to_string(labels[i]) + " out of range");
        }
    }
}

// Number of classes ranked strictly ahead of `label` (higher probability, or equal with a lower index).
std::size_t rank_of(const std::vector<double>& p, int label) {
    const double v = p[static_cast<std::size_t>(label)];
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        if (p[c] > v || (p[c] == v && c < static_cast<std::size_t>(label))) ++ahead;
    }
    return ahead;
}

}  // namespace

double topk_accuracy(std::span<const std::vector<double>> preds, std::span<const int> labels, int k) {
    if (k < 1) throw Error("topk_accuracy: k must be >= 1");
    check_inputs(preds, labels);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += rank_of(preds[i], labels[i]) < static_cast<std::size_t>(k) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double mean_class_accuracy(std::span<const std::vector<double>> preds, std::span<const int> labels) {
    check_inputs(preds, labels);
    std::map<int, std::pair<int, int>> tally;  // class -> (hits, count)
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto& t = tally[labels[i]];
        t.first += rank_of(preds[i], labels[i]) == 0 ? 1 : 0;
        t.second += 1;
    }
    double sum = 0.0;
    for (const auto& [cls, t] : tally) sum += static_cast<double>(t.first) / t.second;
    return sum / static_cast<double>(tally.size());
}

double quantile(std::span<const double> values, double q) {
    if (values.empty()) throw Error("quantile: empty input");
    if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile must be in [0, 1]");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return frac == 0.0 ? v[lo] : v[lo] + frac * (v[hi] - v[lo]);
}

PrecisionRecall hotspot_prf(const HotspotMap& pred, const HotspotMap& gt, double threshold_quantile) {
    if (!(pred.grid == gt.grid)) throw Error("hotspot_prf: grid mismatch");
    PrecisionRecall r;
    r.pred_threshold = quantile(pred.probs, threshold_quantile);
    r.gt_threshold = quantile(gt.probs, threshold_quantile);
    std::size_t tp = 0, pred_pos = 0, gt_pos = 0;
    for (std::size_t i = 0; i < pred.probs.size(); ++i) {
        const bool p = pred.probs[i] > r.pred_threshold;
        const bool g = gt.probs[i] > r.gt_threshold;
        pred_pos += p ? 1 : 0;
        gt_pos += g ? 1 : 0;
        tp += (p && g) ? 1 : 0;
    }
    r.precision = pred_pos > 0 ? static_cast<double>(tp) / pred_pos : 0.0;
    r.recall = gt_pos > 0 ? static_cast<double>(tp) / gt_pos : 0.0;
    r.f1 = (pred_pos > 0 && r.precision + r.recall > 0.0) ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

double heatmap_kld(const HotspotMap& pred, const HotspotMap& gt, KldDirection direction) {
    if (!(pred.grid == gt.grid)) throw Error("heatmap_kld: grid mismatch");
    const HotspotMap& p = direction == KldDirection::gt_to_pred ? gt : pred;
    const HotspotMap& q = direction == KldDirection::gt_to_pred ? pred : gt;
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
        sp += p.probs[i];
        sq += q.probs[i];
    }
    if (!(sp > 0.0) || !(sq > 0.0)) throw Error("heatmap_kld: maps must have positive mass");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
        const double pi = std::max(p.probs[i] / sp, 1e-12);
        const double qi = std::max(q.probs[i] / sq, 1e-12);
        kl += pi * std::log(pi / qi);
    }
    return std::max(kl, 0.0);
}

int argmax_cell(const AttentionVolume& vol, int t) {
    const auto n = static_cast<std::size_t>(vol.grid.slice_cells());
    const auto first = vol.probs.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(t) * n);
    return static_cast<int>(std::max_element(first, first + static_cast<std::ptrdiff_t>(n)) - first);
}

int argmax_cell(const HotspotMap& map) {
    return static_cast<int>(std::max_element(map.probs.begin(), map.probs.end()) - map.probs.begin());
}

DisplacementErrors displacement_errors(std::span<const Point2> pred, std::span<const Point2> gt) {
    if (gt.empty()) throw Error("trajectory_errors: empty trajectory");
    if (pred.size() != gt.size()) throw Error("displacement_errors: trajectories differ in length");
    DisplacementErrors e;
    for (std::size_t i = 0; i < gt.size(); ++i) e.per_slice.push_back(std::hypot(pred[i].x - gt[i].x, pred[i].y - gt[i].y));
    double sum = 0.0;
    for (double d : e.per_slice) sum += d;
    e.ade = sum / static_cast<double>(e.per_slice.size());
    e.fde = e.per_slice.back();
    return e;
}

DisplacementErrors trajectory_errors(const AttentionVolume& pred, std::span<const Point2> gt) {
    if (gt.empty()) throw Error("trajectory_errors: empty trajectory");
    const Trajectory target = priors::resample_trajectory(gt, pred.grid.t);
    Trajectory points;
    const Grid2 g = pred.grid.spatial();
    for (int t = 0; t < pred.grid.t; ++t) {
        const int cell = argmax_cell(pred, t);
        points.push_back(cell_center(g, cell / g.w, cell % g.w));
    }
    return displacement_errors(points, target);
}

}  // namespace motorattn::metrics
