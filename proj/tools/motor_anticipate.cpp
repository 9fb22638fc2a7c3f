// motor-anticipate: dataset generation, training, evaluation and prediction.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "motorattn/inference.hpp"
#include "motorattn/metrics.hpp"
#include "motorattn/report.hpp"
#include "motorattn/synth.hpp"
#include "motorattn/training.hpp"
#include "motorattn/visualize.hpp"

namespace fs = std::filesystem;
using namespace motorattn;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFailure = 3;

/// Reads `--options` files written as JSON: top-level keys are flags of the main command, nested
/// objects hold the flags of a subcommand, e.g. {"train": {"epochs": 3}}.
class JsonOptions : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        nlohmann::json j;
        for (const CLI::Option* opt : app->get_options({})) {
            if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
            const std::string name = opt->get_lnames().front();
            if (opt->count() > 0) {
                j[name] = opt->results().size() == 1 ? nlohmann::json(opt->results().front()) : nlohmann::json(opt->results());
            } else if (default_also && !opt->get_default_str().empty()) {
                j[name] = opt->get_default_str();
            }
        }
        for (const CLI::App* sub : app->get_subcommands({})) j[sub->get_name()] = nlohmann::json::parse(to_config(sub, default_also, false, ""));
        return j.dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json j;
        try {
            input >> j;
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConversionError("options file is not valid JSON: " + std::string(e.what()));
        }
        return items(j, {});
    }

private:
    static std::string scalar(const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }

    std::vector<CLI::ConfigItem> items(const nlohmann::json& j, std::vector<std::string> parents) const {
        std::vector<CLI::ConfigItem> out;
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                auto path = parents;
                path.push_back(key);
                auto nested = items(value, path);
                out.insert(out.end(), nested.begin(), nested.end());
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(value));
            }
            out.push_back(std::move(item));
        }
        return out;
    }
};

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const nlohmann::json& j, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// The default model adapted to the clip geometry and label space of a dataset.
model::ModelConfig model_config_for(const synth::DatasetManifest& manifest, const std::string& config_path) {
    if (!config_path.empty()) return read_json(config_path).get<model::ModelConfig>();
    model::ModelConfig cfg;
    cfg.frames = manifest.generator.num_frames_observed;
    cfg.height = manifest.generator.height;
    cfg.width = manifest.generator.width;
    cfg.num_actions = manifest.generator.num_actions();
    return cfg;
}

struct GenDataArgs {
    std::string config, out, model_config;
    int n_train = 2000;
    int n_val = 400;
    bool with_priors = false;
    std::optional<std::uint64_t> seed;
};

int run_gen_data(const GenDataArgs& a) {
    synth::SceneConfig scene;
    if (!a.config.empty()) scene = read_json(a.config).get<synth::SceneConfig>();
    if (a.seed) scene.seed = *a.seed;
    synth::DatasetOptions opts;
    opts.with_priors = a.with_priors;
    if (!a.model_config.empty()) {
        const auto mc = read_json(a.model_config).get<model::ModelConfig>();
        opts.motor_grid = mc.motor_grid;
        opts.hotspot_grid = mc.hotspot_grid;
    }
    const auto m = synth::generate_dataset(scene, a.n_train, a.n_val, a.out, opts);
    std::cout << nlohmann::json{{"out", a.out},
                                {"train", m.split(synth::Split::train).size()},
                                {"val", m.split(synth::Split::val).size()},
                                {"num_actions", scene.num_actions()},
                                {"with_priors", a.with_priors}}
                     .dump()
              << '\n';
    return 0;
}

struct TrainArgs {
    std::string data, model_config, train_config, out, log;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    bool resume = false;
    bool quiet = false;
};

int run_train(const TrainArgs& a) {
    const auto manifest = synth::load_manifest(a.data);
    const model::ModelConfig cfg = model_config_for(manifest, a.model_config);
    cfg.validate();
    training::TrainConfig tcfg;
    if (!a.train_config.empty()) tcfg = read_json(a.train_config).get<training::TrainConfig>();
    if (a.seed) tcfg.seed = *a.seed;
    if (a.epochs) tcfg.epochs = *a.epochs;
    tcfg.validate();

    const training::Dataset data = training::load_dataset(a.data, cfg);
    training::TrainOptions opts;
    opts.checkpoint_path = a.out;
    opts.log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    if (a.resume) {
        const fs::path last = a.out + ".last";
        opts.resume = training::load_checkpoint(last, &cfg);
        // The epoch count may grow on resume; everything else must match the original run.
        if (opts.resume->train_config) {
            auto stored = nlohmann::json(*opts.resume->train_config);
            auto requested = nlohmann::json(tcfg);
            stored.erase("epochs");
            requested.erase("epochs");
            if (stored != requested) throw Error("resume checkpoint was written with a different train config");
        }
    }
    if (!a.quiet) {
        opts.on_epoch = [](const training::EpochRecord& r) {
            std::cerr << "epoch " << r.epoch << "  loss " << r.train_loss.total << "  train top1 " << r.train_top1
                      << "  val top1 " << r.val_top1 << "  (" << r.wall_seconds << " s)\n";
        };
    }
    const auto result = training::train(data, cfg, tcfg, opts);
    if (result.history.empty()) {
        // Nothing to train: store the initial parameters so the run still yields a checkpoint.
        if (!a.resume) training::save_checkpoint(result.params, cfg, a.out);
        std::cout << nlohmann::json{{"epochs_run", 0}}.dump() << '\n';
        return 0;
    }
    const auto& last = result.history.back();
    std::cout << nlohmann::json{{"epochs_run", result.history.size()},
                                {"final_epoch", last.epoch},
                                {"val_top1", last.val_top1},
                                {"val_loss", last.val_loss.total},
                                {"best_epoch", result.best_epoch},
                                {"checkpoint", a.out}}
                     .dump()
              << '\n';
    return 0;
}

struct EvalArgs {
    std::string data, ckpt, split = "val", report;
    bool baselines = false;
    double threshold = 0.75;
    int lstm_epochs = 60;
    int lstm_hidden = 64;
};

int run_eval(const EvalArgs& a) {
    const auto ckpt = training::load_checkpoint(a.ckpt);
    const training::Dataset data = training::load_dataset(a.data, ckpt.config);
    nlohmann::json report{{"checkpoint", a.ckpt}, {"data", a.data}};
    std::vector<std::pair<std::string, const std::vector<training::Example>*>> splits;
    if (a.split == "train" || a.split == "all") splits.emplace_back("train", &data.train);
    if (a.split == "val" || a.split == "all") splits.emplace_back("val", &data.val);
    for (const auto& [name, examples] : splits) {
        report[name] = report::to_json(report::evaluate_split(ckpt.config, ckpt.params, *examples, a.threshold));
        if (a.baselines) {
            report::BaselineOptions bo;
            bo.threshold_quantile = a.threshold;
            bo.lstm.epochs = a.lstm_epochs;
            bo.lstm_hidden = a.lstm_hidden;
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& row : report::evaluate_baselines(ckpt.config, data.train, *examples, bo)) rows.push_back(report::to_json(row));
            report[name]["baselines"] = rows;
        }
    }
    if (!a.report.empty()) write_json(report, a.report);
    std::cout << report.dump(2) << '\n';
    return 0;
}

struct PredictArgs {
    std::string ckpt, clip, out;
    bool overlays = false;
    int top_k = 5;
    int scale = 4;
};

int run_predict(const PredictArgs& a) {
    const auto ckpt = training::load_checkpoint(a.ckpt);
    const synth::VideoClip clip = synth::load_clip(a.clip);
    const auto pred = inference::predict(ckpt.config, ckpt.params, clip);

    std::vector<int> order(pred.action_probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return pred.action_probs[static_cast<std::size_t>(x)] > pred.action_probs[static_cast<std::size_t>(y)];
    });
    const int k = std::min(a.top_k, static_cast<int>(order.size()));
    nlohmann::json top = nlohmann::json::array();
    for (int i = 0; i < k; ++i) top.push_back({{"action_id", order[static_cast<std::size_t>(i)]},
                                               {"probability", pred.action_probs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]}});
    nlohmann::json motor_argmax = nlohmann::json::array();
    const Grid2 mg = pred.motor.grid.spatial();
    for (int t = 0; t < pred.motor.grid.t; ++t) {
        const int cell = metrics::argmax_cell(pred.motor, t);
        const Point2 p = cell_center(mg, cell / mg.w, cell % mg.w);
        motor_argmax.push_back({{"slice", t}, {"row", cell / mg.w}, {"col", cell % mg.w}, {"x", p.x}, {"y", p.y}});
    }
    const int hcell = metrics::argmax_cell(pred.hotspot);
    nlohmann::json record{{"clip", a.clip},
                          {"top_k", top},
                          {"motor_argmax", motor_argmax},
                          {"hotspot_argmax", {{"row", hcell / pred.hotspot.grid.w}, {"col", hcell % pred.hotspot.grid.w}}},
                          {"hotspot", pred.hotspot.probs}};
    if (clip.label.action_id >= 0) record["label"] = clip.label.action_id;

    if (!a.out.empty()) {
        fs::create_directories(a.out);
        write_json(record, fs::path(a.out) / "prediction.json");
        if (a.overlays) {
            const auto base = visualize::frame_image(clip, clip.frames_count - 1, a.scale);
            nlohmann::json files = nlohmann::json::array();
            for (int t = 0; t < pred.motor.grid.t; ++t) {
                const fs::path f = fs::path(a.out) / ("motor_slice_" + std::to_string(t) + ".png");
                visualize::write_png(visualize::heatmap_overlay(base, pred.motor.slice(t)), f);
                files.push_back(f.string());
            }
            const fs::path hot = fs::path(a.out) / "hotspot.png";
            visualize::write_png(visualize::heatmap_overlay(base, pred.hotspot), hot);
            const fs::path traj = fs::path(a.out) / "trajectory.png";
            visualize::write_png(visualize::trajectory_overlay(base, pred.motor), traj);
            files.push_back(hot.string());
            files.push_back(traj.string());
            record["overlays"] = files;
            write_json(record, fs::path(a.out) / "prediction.json");
        }
    }
    std::cout << record.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Egocentric action anticipation with motor attention and interaction hotspots"};
    app.config_formatter(std::make_shared<JsonOptions>());
    app.set_config("--options", "", "JSON file of flag values (command-line flags take precedence)");
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    gen_cmd->add_option("--config", gen.config, "Scene config JSON")->check(CLI::ExistingFile);
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--n-train", gen.n_train, "Training clips")->capture_default_str();
    gen_cmd->add_option("--n-val", gen.n_val, "Validation clips")->capture_default_str();
    gen_cmd->add_flag("--with-priors", gen.with_priors, "Write motor and hotspot priors next to the clips");
    gen_cmd->add_option("--model-config", gen.model_config, "Model config JSON whose attention grids size the priors")
        ->check(CLI::ExistingFile);
    gen_cmd->add_option("--seed", gen.seed, "Generator seed (overrides the scene config)");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train the joint model");
    train_cmd->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    train_cmd->add_option("--model-config", tr.model_config, "Model config JSON")->check(CLI::ExistingFile);
    train_cmd->add_option("--train-config", tr.train_config, "Training config JSON")->check(CLI::ExistingFile);
    train_cmd->add_option("--out", tr.out, "Checkpoint path (best epoch); <out>.last holds the resumable state")->required();
    train_cmd->add_option("--log", tr.log, "Metrics log, JSON lines (default <out>.log.jsonl)");
    train_cmd->add_option("--seed", tr.seed, "Training seed (overrides the train config)");
    train_cmd->add_option("--epochs", tr.epochs, "Epoch count (overrides the train config)");
    train_cmd->add_flag("--resume", tr.resume, "Continue from <out>.last");
    train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--data", ev.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--split", ev.split, "train, val or all")->check(CLI::IsMember({"train", "val", "all"}))->capture_default_str();
    eval_cmd->add_flag("--baselines", ev.baselines, "Add center-prior, Kalman, GP and LSTM rows");
    eval_cmd->add_option("--report", ev.report, "Write the JSON report here");
    eval_cmd->add_option("--threshold-quantile", ev.threshold, "Hotspot binarization quantile")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    eval_cmd->add_option("--lstm-epochs", ev.lstm_epochs, "LSTM baseline training epochs")->check(CLI::PositiveNumber)->capture_default_str();
    eval_cmd->add_option("--lstm-hidden", ev.lstm_hidden, "LSTM baseline hidden size")->check(CLI::PositiveNumber)->capture_default_str();

    PredictArgs pr;
    auto add_predict = [&](const std::string& name, const std::string& help) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option("--ckpt", pr.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
        cmd->add_option("--clip", pr.clip, "Clip file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", pr.out, "Output directory for prediction.json and overlays");
        cmd->add_flag("--overlays", pr.overlays, "Write PNG overlays of M, A and the trajectory");
        cmd->add_option("--top-k", pr.top_k, "Actions to report")->check(CLI::PositiveNumber)->capture_default_str();
        cmd->add_option("--scale", pr.scale, "Overlay upscaling factor")->check(CLI::Range(1, 16))->capture_default_str();
        return cmd;
    };
    auto* predict_cmd = add_predict("predict", "Predict one clip");
    auto* visualize_cmd = add_predict("visualize", "Predict one clip and write overlays");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*gen_cmd) return run_gen_data(gen);
        if (*train_cmd) return run_train(tr);
        if (*eval_cmd) return run_eval(ev);
        if (*visualize_cmd) {
            pr.overlays = true;
            if (pr.out.empty()) pr.out = ".";
        }
        if (*predict_cmd || *visualize_cmd) return run_predict(pr);
    } catch (const training::DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
