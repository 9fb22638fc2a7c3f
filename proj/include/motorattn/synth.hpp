#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "motorattn/types.hpp"

namespace motorattn::synth {

inline constexpr std::uint32_t kClipFormatVersion = 1;
inline constexpr std::uint32_t kManifestFormatVersion = 1;
inline constexpr int kMaxVerbs = 3;
inline constexpr int kMaxNouns = 8;

enum class CameraMotion { none, translation, translation_rotation };

struct SceneConfig {
    int height = 64;
    int width = 64;
    int num_frames_observed = 16;
    int num_frames_future = 8;
    int num_objects = 3;
    std::vector<int> verb_set{0, 1, 2};
    std::vector<int> noun_set{0, 1, 2, 3};
    CameraMotion camera_motion = CameraMotion::none;
    double noise_level = 0.02;
    /// Maximum Bezier control-point offset as a fraction of the chord length.
    double curvature = 0.35;
    /// Multiplies every verb's hand speed.
    double speed_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    [[nodiscard]] int num_actions() const { return static_cast<int>(verb_set.size() * noun_set.size()); }
};

void to_json(nlohmann::json& j, const SceneConfig& cfg);
void from_json(const nlohmann::json& j, SceneConfig& cfg);

struct ActionLabel {
    int verb_id = 0;
    int noun_id = 0;
    int action_id = 0;

    friend bool operator==(const ActionLabel&, const ActionLabel&) = default;
};

/// Bijection between (verb, noun) pairs of the configured sets and dense action ids.
class ActionSpace {
public:
    ActionSpace(std::vector<int> verbs, std::vector<int> nouns);
    explicit ActionSpace(const SceneConfig& cfg) : ActionSpace(cfg.verb_set, cfg.noun_set) {}

    [[nodiscard]] int size() const { return static_cast<int>(verbs_.size() * nouns_.size()); }
    [[nodiscard]] ActionLabel encode(int verb_id, int noun_id) const;
    [[nodiscard]] ActionLabel decode(int action_id) const;

private:
    std::vector<int> verbs_;
    std::vector<int> nouns_;
};

struct VideoClip {
    int frames_count = 0;
    int height = 0;
    int width = 0;
    int channels = 3;
    /// frames_count x height x width x channels, values in [0,1].
    std::vector<float> frames;
    ActionLabel label;
    /// Future hand positions over the anticipation window, in last observable frame coordinates.
    Trajectory future_trajectory;
    /// Hand positions over the observed frames, in last observable frame coordinates.
    Trajectory observed_trajectory;
    Point2 hotspot_point;
    /// Transition t -> t+1 in normalized coordinates, for every frame of the observed and future window.
    std::vector<Eigen::Matrix3d> camera_motions;

    [[nodiscard]] float pixel(int t, int r, int c, int ch) const {
        return frames[static_cast<std::size_t>(((t * height + r) * width + c) * channels + ch)];
    }
};

bool operator==(const VideoClip& a, const VideoClip& b);

struct SceneObject {
    int noun_id = 0;
    Point2 center;  ///< world coordinates (frame 0)
    double radius = 0.0;
};

/// A clip plus the scene state that produced it.
struct GeneratedScene {
    VideoClip clip;
    std::vector<SceneObject> objects;
    int target_index = 0;
    /// Hand centre in world coordinates for every observed and future frame.
    Trajectory hand_world;
};

GeneratedScene generate_scene(const SceneConfig& cfg, std::uint64_t seed,
                              std::optional<ActionLabel> forced_label = std::nullopt, bool render = true);

/// Renders one clip; the label is drawn from the seed unless forced.
VideoClip generate_clip(const SceneConfig& cfg, std::uint64_t seed,
                        std::optional<ActionLabel> forced_label = std::nullopt);

std::vector<unsigned char> encode_clip(const VideoClip& clip);
VideoClip decode_clip(std::span<const unsigned char> bytes);
void save_clip(const VideoClip& clip, const std::filesystem::path& path);
VideoClip load_clip(const std::filesystem::path& path);

/// Reference distributions stored next to a clip ("MAPR" container).
struct ClipPriors {
    AttentionVolume motor;
    HotspotMap hotspot;
};

std::vector<unsigned char> encode_priors(const AttentionVolume& motor, const HotspotMap& hotspot);
ClipPriors decode_priors(std::span<const unsigned char> bytes);
ClipPriors load_priors(const std::filesystem::path& path);

enum class Split { train, val };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
    std::string path;  ///< relative to the dataset directory
    ActionLabel label;
    Split split = Split::train;
    std::uint64_t seed = 0;
    std::string checksum;
    std::string priors_path;  ///< empty unless priors were written
};

struct DatasetManifest {
    std::uint32_t format_version = kManifestFormatVersion;
    SceneConfig generator;
    std::vector<ManifestEntry> clips;
    std::vector<int> class_counts;
    bool with_priors = false;

    [[nodiscard]] std::vector<const ManifestEntry*> split(Split s) const;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

/// Seeds of split `s`: train and validation ranges never overlap.
std::uint64_t clip_seed(const SceneConfig& cfg, Split s, std::size_t index);

struct DatasetOptions {
    bool with_priors = false;
    double prior_sigma = 1.0;
    Grid3 motor_grid{4, 16, 16};
    Grid2 hotspot_grid{8, 8};
    int threads = 0;  ///< 0 selects the hardware concurrency capped by MOTOR_ANTICIPATE_THREADS
};

DatasetManifest generate_dataset(const SceneConfig& cfg, int n_train, int n_val, const std::filesystem::path& out_dir,
                                 const DatasetOptions& options = {});

/// Reads `manifest.json` from `dir`, validating that every listed clip exists.
DatasetManifest load_manifest(const std::filesystem::path& dir);

/// Worker count honouring the MOTOR_ANTICIPATE_THREADS cap.
int worker_threads(int requested = 0);

}  // namespace motorattn::synth
