#include "motorattn/report.hpp"

#include "motorattn/inference.hpp"
#include "motorattn/metrics.hpp"
#include "motorattn/priors.hpp"

namespace motorattn::report {

nlohmann::json to_json(const SplitMetrics& m) {
    return nlohmann::json{{"count", m.count},         {"top1", m.top1},     {"top5", m.top5},
                          {"mean_class", m.mean_class}, {"precision", m.precision}, {"recall", m.recall},
                          {"f1", m.f1},               {"kld", m.kld},       {"ade", m.ade},
                          {"fde", m.fde},             {"threshold_quantile", m.threshold_quantile}};
}

HotspotMap hotspot_ground_truth(const synth::VideoClip& clip, Grid2 grid, double sigma) {
    return priors::render_point_prior(clip.hotspot_point, grid, sigma);
}

SplitMetrics evaluate_split(const model::ModelConfig& cfg, const model::ModelParams& params,
                            std::span<const training::Example> examples, double threshold_quantile) {
    if (examples.empty()) throw Error("evaluate: no clips in split");
    SplitMetrics m;
    m.count = static_cast<int>(examples.size());
    m.threshold_quantile = threshold_quantile;
    std::vector<std::vector<double>> preds;
    std::vector<int> labels;
    for (const auto& ex : examples) {
        const auto p = inference::predict(cfg, params, ex.clip);
        preds.push_back(p.action_probs);
        labels.push_back(ex.clip.label.action_id);
        const HotspotMap gt = hotspot_ground_truth(ex.clip, cfg.hotspot_grid);
        const auto prf = metrics::hotspot_prf(p.hotspot, gt, threshold_quantile);
        m.precision += prf.precision;
        m.recall += prf.recall;
        m.f1 += prf.f1;
        m.kld += metrics::heatmap_kld(p.hotspot, gt);
        const auto de = metrics::trajectory_errors(p.motor, ex.clip.future_trajectory);
        m.ade += de.ade;
        m.fde += de.fde;
    }
    const double n = m.count;
    m.top1 = metrics::topk_accuracy(preds, labels, 1);
    m.top5 = metrics::topk_accuracy(preds, labels, std::min(5, cfg.num_actions));
    m.mean_class = metrics::mean_class_accuracy(preds, labels);
    for (double* v : {&m.precision, &m.recall, &m.f1, &m.kld, &m.ade, &m.fde}) *v /= n;
    return m;
}

nlohmann::json to_json(const BaselineRow& row) {
    nlohmann::json j{{"method", row.method}, {"count", row.count}};
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("ade", row.ade);
    put("fde", row.fde);
    put("precision", row.precision);
    put("recall", row.recall);
    put("f1", row.f1);
    put("kld", row.kld);
    return j;
}

namespace {

template <typename Forecast>
BaselineRow trajectory_row(const std::string& name, std::span<const training::Example> eval, int slices, Forecast&& forecast) {
    BaselineRow row;
    row.method = name;
    double ade = 0.0, fde = 0.0;
    for (const auto& ex : eval) {
        const auto& clip = ex.clip;
        if (clip.observed_trajectory.size() < 3 || clip.future_trajectory.empty()) continue;
        const Trajectory f = forecast(clip.observed_trajectory, static_cast<int>(clip.future_trajectory.size()));
        const auto e = metrics::displacement_errors(priors::resample_trajectory(f, slices),
                                                    priors::resample_trajectory(clip.future_trajectory, slices));
        ade += e.ade;
        fde += e.fde;
        ++row.count;
    }
    if (row.count > 0) {
        row.ade = ade / row.count;
        row.fde = fde / row.count;
    }
    return row;
}

}  // namespace

std::vector<BaselineRow> evaluate_baselines(const model::ModelConfig& cfg, std::span<const training::Example> train,
                                            std::span<const training::Example> eval, const BaselineOptions& options) {
    std::vector<BaselineRow> rows;

    BaselineRow center;
    center.method = "center_prior";
    const HotspotMap prior = baselines::center_prior(cfg.hotspot_grid);
    double p = 0.0, r = 0.0, f1 = 0.0, kld = 0.0;
    for (const auto& ex : eval) {
        const HotspotMap gt = hotspot_ground_truth(ex.clip, cfg.hotspot_grid);
        const auto prf = metrics::hotspot_prf(prior, gt, options.threshold_quantile);
        p += prf.precision;
        r += prf.recall;
        f1 += prf.f1;
        kld += metrics::heatmap_kld(prior, gt);
        ++center.count;
    }
    if (center.count > 0) {
        center.precision = p / center.count;
        center.recall = r / center.count;
        center.f1 = f1 / center.count;
        center.kld = kld / center.count;
    }
    rows.push_back(center);

    const int slices = cfg.motor_grid.t;
    rows.push_back(trajectory_row("kalman", eval, slices,
                                  [](const Trajectory& o, int n) { return baselines::kalman_forecast(o, n); }));
    rows.push_back(trajectory_row("gpr", eval, slices,
                                  [](const Trajectory& o, int n) { return baselines::gpr_forecast(o, n); }));

    std::vector<baselines::TrajectorySample> corpus;
    for (const auto& ex : train) {
        if (ex.clip.observed_trajectory.size() < 3 || ex.clip.future_trajectory.empty()) continue;
        corpus.push_back({ex.clip.observed_trajectory, ex.clip.future_trajectory});
    }
    if (!corpus.empty()) {
        baselines::LstmForecaster lstm(options.lstm_hidden);
        lstm.train(corpus, options.lstm);
        rows.push_back(trajectory_row("lstm", eval, slices, [&](const Trajectory& o, int n) {
            return baselines::lstm_forecast(o, n, lstm);
        }));
    }
    return rows;
}

}  // namespace motorattn::report
