#include "motorattn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "motorattn/binary_io.hpp"
#include "motorattn/priors.hpp"
#include "motorattn/rng.hpp"

namespace motorattn::baselines {

// ---------------------------------------------------------------------------------------------
// Kalman

Trajectory kalman_forecast(std::span<const Point2> observed, int n_future, const KalmanOptions& options) {
    if (observed.size() < 3) throw Error("kalman_forecast: need at least 3 observed points");
    if (n_future < 0) throw Error("kalman_forecast: n_future must be non-negative");
    Eigen::Matrix3d F;
    F << 1.0, 1.0, 0.5, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0;
    const Eigen::Matrix3d Q = options.process_noise * Eigen::Matrix3d::Identity();
    const double R = options.measurement_noise;
    const Eigen::RowVector3d H(1.0, 0.0, 0.0);

    std::array<Eigen::Vector3d, 2> state;
    std::array<Eigen::Matrix3d, 2> cov;
    for (int axis = 0; axis < 2; ++axis) {
        auto z = [&](std::size_t i) { return axis == 0 ? observed[i].x : observed[i].y; };
        // Exact state of the quadratic through the first three observations, at the third.
        const double a = z(2) - 2.0 * z(1) + z(0);
        const double v = (z(2) - z(1)) + 0.5 * a;
        Eigen::Vector3d x(z(2), v, a);
        Eigen::Matrix3d P = R * Eigen::Matrix3d::Identity();
        for (std::size_t i = 3; i < observed.size(); ++i) {
            x = F * x;
            P = F * P * F.transpose() + Q;
            const double s = H * P * H.transpose() + R;
            const Eigen::Vector3d K = P * H.transpose() / s;
            x += K * (z(i) - H * x);
            P = (Eigen::Matrix3d::Identity() - K * H) * P;
        }
        state[static_cast<std::size_t>(axis)] = x;
        cov[static_cast<std::size_t>(axis)] = P;
    }
    Trajectory out;
    for (int k = 0; k < n_future; ++k) {
        state[0] = F * state[0];
        state[1] = F * state[1];
        out.push_back({state[0](0), state[1](0)});
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Gaussian process regression

namespace {

Eigen::MatrixXd rbf_gram(const std::vector<double>& t, const GpRegressor::Hyper& h) {
    const auto n = static_cast<Eigen::Index>(t.size());
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = (t[static_cast<std::size_t>(i)] - t[static_cast<std::size_t>(j)]) / h.length_scale;
            K(i, j) = h.signal_variance * std::exp(-0.5 * d * d);
        }
        K(i, i) += h.noise_variance + 1e-12;
    }
    return K;
}

}  // namespace

void GpRegressor::condition(std::span<const double> times, std::span<const double> values, const Hyper& hyper) {
    if (times.size() != values.size() || times.empty()) throw Error("GpRegressor: times and values must be non-empty and equal in length");
    hyper_ = hyper;
    times_.assign(times.begin(), times.end());
    mean_ = 0.0;
    for (double v : values) mean_ += v;
    mean_ /= static_cast<double>(values.size());
    Eigen::VectorXd y(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) y(static_cast<Eigen::Index>(i)) = values[i] - mean_;
    const Eigen::LLT<Eigen::MatrixXd> llt(rbf_gram(times_, hyper_));
    if (llt.info() != Eigen::Success) throw Error("GpRegressor: kernel matrix is not positive definite");
    alpha_ = llt.solve(y);
    const Eigen::MatrixXd L = llt.matrixL();
    lml_ = -0.5 * y.dot(alpha_) - L.diagonal().array().log().sum() -
           0.5 * static_cast<double>(values.size()) * std::log(2.0 * std::numbers::pi);
}

void GpRegressor::fit(std::span<const double> times, std::span<const double> values) {
    if (times.size() < 2 || times.size() != values.size()) throw Error("GpRegressor: need at least 2 samples");
    const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
    if (*hi - *lo <= 0.0) throw Error("GpRegressor: degenerate input (all timestamps identical)");
    double mean = 0.0, var = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    for (double v : values) var += (v - mean) * (v - mean);
    var = std::max(var / static_cast<double>(values.size()), 1e-12);
    const double span = *hi - *lo;
    Hyper best;
    double best_lml = -std::numeric_limits<double>::infinity();
    for (double ls : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        for (double sf : {0.25, 1.0, 4.0, 16.0}) {
            for (double sn : {1e-6, 1e-4, 1e-2}) {
                const Hyper h{ls * span, sf * var, sn * var};
                condition(times, values, h);
                if (lml_ > best_lml) {
                    best_lml = lml_;
                    best = h;
                }
            }
        }
    }
    condition(times, values, best);
}

double GpRegressor::predict(double t) const {
    double m = mean_;
    for (std::size_t i = 0; i < times_.size(); ++i) {
        const double d = (t - times_[i]) / hyper_.length_scale;
        m += hyper_.signal_variance * std::exp(-0.5 * d * d) * alpha_(static_cast<Eigen::Index>(i));
    }
    return m;
}

Trajectory gpr_forecast(std::span<const Point2> observed, int n_future) {
    if (observed.size() < 2) throw Error("gpr_forecast: need at least 2 observed points");
    if (n_future < 0) throw Error("gpr_forecast: n_future must be non-negative");
    std::vector<double> t, xs, ys;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        t.push_back(static_cast<double>(i));
        xs.push_back(observed[i].x);
        ys.push_back(observed[i].y);
    }
    GpRegressor gx, gy;
    gx.fit(t, xs);
    gy.fit(t, ys);
    const auto hx = gx.hyper(), hy = gy.hyper();
    Trajectory out;
    for (int k = 0; k < n_future; ++k) {
        const double next = static_cast<double>(t.size());
        const Point2 p{gx.predict(next), gy.predict(next)};
        out.push_back(p);
        t.push_back(next);
        xs.push_back(p.x);
        ys.push_back(p.y);
        gx.condition(t, xs, hx);
        gy.condition(t, ys, hy);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Corpus

std::vector<TrajectorySample> curved_trajectory_corpus(int count, const CorpusOptions& options) {
    if (count < 0) throw Error("corpus size must be non-negative");
    synth::SceneConfig cfg;
    cfg.num_frames_observed = options.observed;
    cfg.num_frames_future = options.future;
    cfg.seed = options.seed;
    std::vector<TrajectorySample> out;
    for (int i = 0; i < count; ++i) {
        const std::uint64_t seed = (options.seed << 32) + 0x7000'0000ULL + static_cast<std::uint64_t>(i);
        const auto scene = synth::generate_scene(cfg, seed, std::nullopt, false);
        Rng rng = Rng::stream(seed, 0x7a11ULL, 0);
        TrajectorySample s;
        for (int k = 0; k < options.observed; ++k) {
            Point2 p = scene.hand_world[static_cast<std::size_t>(k)];
            if (options.track_noise > 0.0) {
                p.x += rng.normal(0.0, options.track_noise);
                p.y += rng.normal(0.0, options.track_noise);
            }
            s.observed.push_back(p);
        }
        for (int k = options.observed; k < options.observed + options.future; ++k) {
            s.future.push_back(scene.hand_world[static_cast<std::size_t>(k)]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// LSTM

namespace {

constexpr double kDeltaScale = 50.0;  // typical per-frame displacements become O(1)

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct StepCache {
    Eigen::MatrixXd x, h_prev, c_prev, i, f, g, o, c, tanh_c, h;
};

}  // namespace

LstmForecaster::LstmForecaster(int hidden) : hidden_(hidden) {
    if (hidden < 1) throw Error("LSTM hidden size must be >= 1");
    Rng rng(0x157a11ULL);
    const double r = 1.0 / std::sqrt(static_cast<double>(hidden));
    auto uniform = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-r, r);
        return m;
    };
    w_.wx = uniform(4 * hidden, 2);
    w_.wh = uniform(4 * hidden, hidden);
    w_.b = Eigen::MatrixXd::Zero(4 * hidden, 1);
    w_.b.block(hidden, 0, hidden, 1).setOnes();  // forget gate starts open
    w_.wo = uniform(2, hidden);
    w_.bo = Eigen::MatrixXd::Zero(2, 1);
}

double LstmForecaster::loss_and_gradient(std::span<const TrajectorySample> batch, Weights* grad) const {
    if (batch.empty()) throw Error("LSTM: empty batch");
    const auto B = static_cast<Eigen::Index>(batch.size());
    const std::size_t n_obs = batch[0].observed.size();
    const std::size_t n_fut = batch[0].future.size();
    if (n_obs < 2 || n_fut < 1) throw Error("LSTM: need >= 2 observed and >= 1 future points");
    const int E = static_cast<int>(n_obs) - 1;
    const int F = static_cast<int>(n_fut);
    const int S = E + F - 1;
    const int H = hidden_;

    std::vector<Eigen::MatrixXd> inputs(static_cast<std::size_t>(E), Eigen::MatrixXd(2, B));
    Eigen::MatrixXd last(2, B);
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto& obs = batch[static_cast<std::size_t>(b)].observed;
        if (obs.size() != n_obs || batch[static_cast<std::size_t>(b)].future.size() != n_fut) {
            throw Error("LSTM: batch trajectories differ in length");
        }
        for (int k = 0; k < E; ++k) {
            inputs[static_cast<std::size_t>(k)](0, b) = kDeltaScale * (obs[static_cast<std::size_t>(k + 1)].x - obs[static_cast<std::size_t>(k)].x);
            inputs[static_cast<std::size_t>(k)](1, b) = kDeltaScale * (obs[static_cast<std::size_t>(k + 1)].y - obs[static_cast<std::size_t>(k)].y);
        }
        last(0, b) = obs.back().x;
        last(1, b) = obs.back().y;
    }

    std::vector<StepCache> cache(static_cast<std::size_t>(S));
    std::vector<Eigen::MatrixXd> outputs(static_cast<std::size_t>(F));  // scaled deltas d_0..d_{F-1}
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(H, B), c = Eigen::MatrixXd::Zero(H, B);
    for (int k = 0; k < S; ++k) {
        StepCache& s = cache[static_cast<std::size_t>(k)];
        s.x = k < E ? inputs[static_cast<std::size_t>(k)] : outputs[static_cast<std::size_t>(k - E)];
        s.h_prev = h;
        s.c_prev = c;
        Eigen::MatrixXd a = w_.wx * s.x + w_.wh * h;
        a.colwise() += w_.b.col(0);
        s.i = a.topRows(H).unaryExpr(&sigmoid);
        s.f = a.middleRows(H, H).unaryExpr(&sigmoid);
        s.g = a.middleRows(2 * H, H).array().tanh().matrix();
        s.o = a.bottomRows(H).unaryExpr(&sigmoid);
        s.c = s.f.cwiseProduct(s.c_prev) + s.i.cwiseProduct(s.g);
        s.tanh_c = s.c.array().tanh().matrix();
        s.h = s.o.cwiseProduct(s.tanh_c);
        h = s.h;
        c = s.c;
        if (k >= E - 1) {
            Eigen::MatrixXd y = w_.wo * h;
            y.colwise() += w_.bo.col(0);
            outputs[static_cast<std::size_t>(k - E + 1)] = y;
        }
    }

    // Positions and loss.
    const double norm = 1.0 / (static_cast<double>(B) * F * 2);
    double loss = 0.0;
    std::vector<Eigen::MatrixXd> g_pos(static_cast<std::size_t>(F), Eigen::MatrixXd(2, B));
    Eigen::MatrixXd pos = last;
    for (int j = 0; j < F; ++j) {
        pos += outputs[static_cast<std::size_t>(j)] / kDeltaScale;
        for (Eigen::Index b = 0; b < B; ++b) {
            const Point2 gt = batch[static_cast<std::size_t>(b)].future[static_cast<std::size_t>(j)];
            const double ex = pos(0, b) - gt.x, ey = pos(1, b) - gt.y;
            loss += norm * (ex * ex + ey * ey);
            g_pos[static_cast<std::size_t>(j)](0, b) = 2.0 * norm * ex;
            g_pos[static_cast<std::size_t>(j)](1, b) = 2.0 * norm * ey;
        }
    }
    if (grad == nullptr) return loss;

    grad->wx = Eigen::MatrixXd::Zero(w_.wx.rows(), w_.wx.cols());
    grad->wh = Eigen::MatrixXd::Zero(w_.wh.rows(), w_.wh.cols());
    grad->b = Eigen::MatrixXd::Zero(w_.b.rows(), 1);
    grad->wo = Eigen::MatrixXd::Zero(w_.wo.rows(), w_.wo.cols());
    grad->bo = Eigen::MatrixXd::Zero(2, 1);

    // dL/dd_j through the cumulative sum, before the feedback contributions.
    std::vector<Eigen::MatrixXd> g_out(static_cast<std::size_t>(F));
    Eigen::MatrixXd suffix = Eigen::MatrixXd::Zero(2, B);
    for (int j = F - 1; j >= 0; --j) {
        suffix += g_pos[static_cast<std::size_t>(j)];
        g_out[static_cast<std::size_t>(j)] = suffix / kDeltaScale;
    }

    Eigen::MatrixXd g_h_next = Eigen::MatrixXd::Zero(H, B), g_c_next = Eigen::MatrixXd::Zero(H, B);
    for (int k = S - 1; k >= 0; --k) {
        const StepCache& s = cache[static_cast<std::size_t>(k)];
        Eigen::MatrixXd g_h = g_h_next;
        if (k >= E - 1) {
            const Eigen::MatrixXd& gy = g_out[static_cast<std::size_t>(k - E + 1)];
            grad->wo.noalias() += gy * s.h.transpose();
            grad->bo.col(0) += gy.rowwise().sum();
            g_h.noalias() += w_.wo.transpose() * gy;
        }
        const Eigen::MatrixXd g_o = g_h.cwiseProduct(s.tanh_c);
        const Eigen::MatrixXd g_c =
            g_c_next + g_h.cwiseProduct(s.o).cwiseProduct((1.0 - s.tanh_c.array().square()).matrix());
        Eigen::MatrixXd g_a(4 * H, B);
        g_a.topRows(H) = g_c.cwiseProduct(s.g).cwiseProduct(s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
        g_a.middleRows(H, H) = g_c.cwiseProduct(s.c_prev).cwiseProduct(s.f.cwiseProduct((1.0 - s.f.array()).matrix()));
        g_a.middleRows(2 * H, H) = g_c.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());
        g_a.bottomRows(H) = g_o.cwiseProduct(s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
        grad->wx.noalias() += g_a * s.x.transpose();
        grad->wh.noalias() += g_a * s.h_prev.transpose();
        grad->b.col(0) += g_a.rowwise().sum();
        g_h_next.noalias() = w_.wh.transpose() * g_a;
        g_c_next = g_c.cwiseProduct(s.f);
        // Decoder inputs are earlier outputs: route their gradient back.
        if (k >= E) g_out[static_cast<std::size_t>(k - E)] += w_.wx.transpose() * g_a;
    }
    return loss;
}

double LstmForecaster::train(std::span<const TrajectorySample> corpus, const LstmTrainConfig& cfg) {
    if (corpus.empty()) throw Error("LSTM: empty training corpus");
    if (cfg.batch_size < 1 || cfg.epochs < 1 || !(cfg.learning_rate > 0.0)) throw Error("LSTM: invalid training config");
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    auto params = [](Weights& w) { return std::array<Eigen::MatrixXd*, 5>{&w.wx, &w.wh, &w.b, &w.wo, &w.bo}; };
    Weights m, v;
    for (auto [mp, vp, wp] : std::array<std::tuple<Eigen::MatrixXd*, Eigen::MatrixXd*, Eigen::MatrixXd*>, 5>{
             std::tuple{&m.wx, &v.wx, &w_.wx}, std::tuple{&m.wh, &v.wh, &w_.wh}, std::tuple{&m.b, &v.b, &w_.b},
             std::tuple{&m.wo, &v.wo, &w_.wo}, std::tuple{&m.bo, &v.bo, &w_.bo}}) {
        *mp = Eigen::MatrixXd::Zero(wp->rows(), wp->cols());
        *vp = Eigen::MatrixXd::Zero(wp->rows(), wp->cols());
    }
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng::stream(cfg.seed, 0x157aULL, 0);
    long step = 0;
    double epoch_loss = 0.0;
    std::vector<TrajectorySample> batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            batch.clear();
            for (std::size_t k = begin; k < std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size)); ++k) {
                batch.push_back(corpus[order[k]]);
            }
            Weights g;
            epoch_loss += loss_and_gradient(batch, &g);
            ++batches;
            ++step;
            // Cosine-annealed Adam step.
            const double lr = 0.5 * cfg.learning_rate *
                              (1.0 + std::cos(std::numbers::pi * epoch / static_cast<double>(cfg.epochs)));
            const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            const auto gs = params(g), ms = params(m), vs = params(v), ws = params(w_);
            for (std::size_t p = 0; p < 5; ++p) {
                *ms[p] = kBeta1 * *ms[p] + (1.0 - kBeta1) * *gs[p];
                *vs[p] = kBeta2 * *vs[p] + (1.0 - kBeta2) * gs[p]->cwiseProduct(*gs[p]);
                ws[p]->array() -= lr * (ms[p]->array() / c1) / ((vs[p]->array() / c2).sqrt() + kEps);
            }
        }
        epoch_loss /= batches;
        if (!std::isfinite(epoch_loss)) throw Error("LSTM training diverged");
    }
    trained_ = true;
    return epoch_loss;
}

Trajectory LstmForecaster::forecast(std::span<const Point2> observed, int n_future) const {
    if (n_future < 0) throw Error("lstm_forecast: n_future must be non-negative");
    if (n_future == 0) return {};
    if (observed.size() < 2) throw Error("lstm_forecast: need at least 2 observed points");
    TrajectorySample s;
    s.observed.assign(observed.begin(), observed.end());
    s.future.assign(static_cast<std::size_t>(n_future), observed.back());
    // Run the batch machinery forward only and read the decoded positions back out.
    const int E = static_cast<int>(observed.size()) - 1;
    const int H = hidden_;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(H), c = Eigen::VectorXd::Zero(H);
    auto step = [&](const Eigen::Vector2d& x) {
        Eigen::VectorXd a = w_.wx * x + w_.wh * h + w_.b.col(0);
        const Eigen::VectorXd i = a.head(H).unaryExpr(&sigmoid);
        const Eigen::VectorXd f = a.segment(H, H).unaryExpr(&sigmoid);
        const Eigen::VectorXd g = a.segment(2 * H, H).array().tanh().matrix();
        const Eigen::VectorXd o = a.tail(H).unaryExpr(&sigmoid);
        c = f.cwiseProduct(c) + i.cwiseProduct(g);
        h = o.cwiseProduct(c.array().tanh().matrix());
        return Eigen::Vector2d(w_.wo * h + w_.bo.col(0));
    };
    Eigen::Vector2d y;
    for (int k = 0; k < E; ++k) {
        y = step(Eigen::Vector2d(kDeltaScale * (observed[static_cast<std::size_t>(k + 1)].x - observed[static_cast<std::size_t>(k)].x),
                                 kDeltaScale * (observed[static_cast<std::size_t>(k + 1)].y - observed[static_cast<std::size_t>(k)].y)));
    }
    Trajectory out;
    Point2 p = observed.back();
    for (int j = 0; j < n_future; ++j) {
        p.x += y(0) / kDeltaScale;
        p.y += y(1) / kDeltaScale;
        out.push_back(p);
        if (j + 1 < n_future) y = step(y);
    }
    return out;
}

void LstmForecaster::save(const std::filesystem::path& path) const {
    auto dump = [](const Eigen::MatrixXd& m) {
        return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()},
                              {"data", std::vector<double>(m.data(), m.data() + m.size())}};
    };
    const nlohmann::json j{{"format", "motorattn-lstm"}, {"version", 1},       {"hidden", hidden_},
                           {"trained", trained_},        {"wx", dump(w_.wx)},  {"wh", dump(w_.wh)},
                           {"b", dump(w_.b)},            {"wo", dump(w_.wo)},  {"bo", dump(w_.bo)}};
    const std::string text = j.dump();
    io::write_file_atomic(path, std::vector<unsigned char>(text.begin(), text.end()));
}

LstmForecaster LstmForecaster::load(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error("corrupt LSTM weights " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "motorattn-lstm") throw Error("not an LSTM weights file: " + path.string());
    LstmForecaster f(j.at("hidden").get<int>());
    auto read = [&](const char* key, Eigen::MatrixXd& m) {
        const auto& e = j.at(key);
        const auto data = e.at("data").get<std::vector<double>>();
        if (e.at("rows").get<Eigen::Index>() != m.rows() || e.at("cols").get<Eigen::Index>() != m.cols() ||
            static_cast<Eigen::Index>(data.size()) != m.size()) {
            throw Error(std::string("LSTM weights shape mismatch for ") + key);
        }
        std::copy(data.begin(), data.end(), m.data());
    };
    read("wx", f.w_.wx);
    read("wh", f.w_.wh);
    read("b", f.w_.b);
    read("wo", f.w_.wo);
    read("bo", f.w_.bo);
    f.trained_ = j.value("trained", false);
    return f;
}

Trajectory lstm_forecast(std::span<const Point2> observed, int n_future, const LstmForecaster& model) {
    if (!model.trained()) throw Error("lstm_forecast: weights are untrained");
    return model.forecast(observed, n_future);
}

HotspotMap center_prior(Grid2 grid, double sigma) { return priors::render_point_prior({0.5, 0.5}, grid, sigma); }

}  // namespace motorattn::baselines
