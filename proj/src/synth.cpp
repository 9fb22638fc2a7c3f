#include "motorattn/synth.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include "motorattn/binary_io.hpp"
#include "motorattn/priors.hpp"
#include "motorattn/rng.hpp"

namespace motorattn::synth {

namespace {

enum class Shape { disc, square, triangle, diamond, ring, cross };

struct Appearance {
    Shape shape;
    std::array<float, 3> color;
};

constexpr std::array<Appearance, kMaxNouns> kNouns{{
    {Shape::disc, {0.85f, 0.12f, 0.12f}},
    {Shape::square, {0.12f, 0.65f, 0.20f}},
    {Shape::triangle, {0.15f, 0.25f, 0.90f}},
    {Shape::diamond, {0.90f, 0.85f, 0.10f}},
    {Shape::ring, {0.80f, 0.15f, 0.80f}},
    {Shape::cross, {0.10f, 0.80f, 0.85f}},
    {Shape::square, {0.95f, 0.50f, 0.05f}},
    {Shape::triangle, {0.45f, 0.20f, 0.65f}},
}};

// Hand speed per verb in normalized units per frame.
constexpr std::array<double, kMaxVerbs> kVerbSpeed{0.007, 0.0145, 0.022};
constexpr std::array<float, 3> kHandColor{0.95f, 0.72f, 0.58f};
constexpr double kObjectRadius = 0.09;  // fraction of min(H, W)
constexpr double kHandRadius = 0.06;
constexpr double kContactOffset = 0.6;  // contact point distance from the object centre, in radii
constexpr double kSpeedJitter = 0.06;
constexpr int kPlacementAttempts = 400;

double signed_distance(Shape shape, double x, double y, double r) {
    switch (shape) {
        case Shape::disc:
            return std::hypot(x, y) - r;
        case Shape::square:
            return std::max(std::abs(x), std::abs(y)) - 0.82 * r;
        case Shape::triangle: {
            // Equilateral triangle pointing up (image y grows downwards).
            const double k = std::sqrt(3.0);
            const double half = 1.1 * r;
            double px = std::abs(x) - half;
            double py = -y + half / k;
            if (px + k * py > 0.0) {
                const double nx = (px - k * py) / 2.0;
                const double ny = (-k * px - py) / 2.0;
                px = nx;
                py = ny;
            }
            px -= std::clamp(px, -2.0 * half, 0.0);
            return -std::hypot(px, py) * (py < 0.0 ? -1.0 : 1.0);
        }
        case Shape::diamond:
            return (std::abs(x) + std::abs(y) - 1.2 * r) / std::sqrt(2.0);
        case Shape::ring:
            return std::abs(std::hypot(x, y) - 0.72 * r) - 0.28 * r;
        case Shape::cross: {
            const double a = std::max(std::abs(x) - r, std::abs(y) - 0.35 * r);
            const double b = std::max(std::abs(x) - 0.35 * r, std::abs(y) - r);
            return std::min(a, b);
        }
    }
    return 1.0;
}

struct Bezier {
    Point2 p0, p1, p2;

    [[nodiscard]] Point2 at(double u) const {
        const double a = (1 - u) * (1 - u), b = 2 * (1 - u) * u, c = u * u;
        return {a * p0.x + b * p1.x + c * p2.x, a * p0.y + b * p1.y + c * p2.y};
    }
};

// Points spaced at equal arc length along the curve (constant hand speed).
Trajectory sample_constant_speed(const Bezier& curve, int n) {
    constexpr int kTable = 512;
    std::vector<double> cumulative(kTable + 1, 0.0);
    Point2 prev = curve.at(0.0);
    for (int i = 1; i <= kTable; ++i) {
        const Point2 p = curve.at(static_cast<double>(i) / kTable);
        cumulative[i] = cumulative[i - 1] + std::hypot(p.x - prev.x, p.y - prev.y);
        prev = p;
    }
    const double total = cumulative.back();
    Trajectory out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double target = total * k / (n - 1);
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
        const auto i = std::clamp<std::ptrdiff_t>(it - cumulative.begin(), 1, kTable);
        const double seg = cumulative[i] - cumulative[i - 1];
        const double f = seg > 0.0 ? (target - cumulative[i - 1]) / seg : 0.0;
        out[static_cast<std::size_t>(k)] = curve.at((static_cast<double>(i - 1) + f) / kTable);
    }
    out.back() = curve.p2;
    return out;
}

double bezier_length(const Bezier& curve) {
    constexpr int kSteps = 512;
    double total = 0.0;
    Point2 prev = curve.at(0.0);
    for (int i = 1; i <= kSteps; ++i) {
        const Point2 p = curve.at(static_cast<double>(i) / kSteps);
        total += std::hypot(p.x - prev.x, p.y - prev.y);
        prev = p;
    }
    return total;
}

int index_of(const std::vector<int>& v, int value) {
    const auto it = std::find(v.begin(), v.end(), value);
    return it == v.end() ? -1 : static_cast<int>(it - v.begin());
}

std::string camera_to_string(CameraMotion m) {
    switch (m) {
        case CameraMotion::none:
            return "none";
        case CameraMotion::translation:
            return "translation";
        case CameraMotion::translation_rotation:
            return "translation+rotation";
    }
    return "none";
}

CameraMotion camera_from_string(const std::string& s) {
    if (s == "none") return CameraMotion::none;
    if (s == "translation") return CameraMotion::translation;
    if (s == "translation+rotation") return CameraMotion::translation_rotation;
    throw Error("unknown camera_motion '" + s + "'");
}

Eigen::Matrix3d sample_camera_step(CameraMotion motion, Rng& rng) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
    if (motion == CameraMotion::none) return h;
    const double tx = rng.uniform(-1.0, 1.0) * 0.004;
    const double ty = rng.uniform(-1.0, 1.0) * 0.004;
    double angle = 0.0;
    if (motion == CameraMotion::translation_rotation) angle = rng.uniform(-1.0, 1.0) * 0.01;
    const double c = std::cos(angle), s = std::sin(angle);
    Eigen::Matrix3d to_center, rot, from_center, shift;
    to_center << 1, 0, -0.5, 0, 1, -0.5, 0, 0, 1;
    rot << c, -s, 0, s, c, 0, 0, 0, 1;
    from_center << 1, 0, 0.5, 0, 1, 0.5, 0, 0, 1;
    shift << 1, 0, tx, 0, 1, ty, 0, 0, 1;
    return shift * from_center * rot * to_center;
}

bool inside(Point2 p, double margin_x, double margin_y) {
    return p.x >= margin_x && p.x <= 1.0 - margin_x && p.y >= margin_y && p.y <= 1.0 - margin_y;
}

}  // namespace

void SceneConfig::validate() const {
    if (height < 32 || width < 32) throw Error("frame_size must be at least 32x32");
    if (num_frames_observed < 8) throw Error("num_frames_observed must be >= 8");
    if (num_frames_future < 1) throw Error("num_frames_future must be >= 1");
    if (num_objects < 1) throw Error("num_objects must be >= 1");
    if (verb_set.empty() || noun_set.empty()) throw Error("verb_set and noun_set must be non-empty");
    for (int v : verb_set) {
        if (v < 0 || v >= kMaxVerbs) throw Error("verb ids must lie in [0, " + std::to_string(kMaxVerbs) + ")");
    }
    for (int n : noun_set) {
        if (n < 0 || n >= kMaxNouns) throw Error("noun ids must lie in [0, " + std::to_string(kMaxNouns) + ")");
    }
    if (std::set<int>(verb_set.begin(), verb_set.end()).size() != verb_set.size() ||
        std::set<int>(noun_set.begin(), noun_set.end()).size() != noun_set.size()) {
        throw Error("verb_set and noun_set must not contain duplicates");
    }
    if (num_objects > static_cast<int>(noun_set.size())) {
        throw Error("num_objects cannot exceed the number of distinct nouns");
    }
    if (!(noise_level >= 0.0)) throw Error("noise_level must be >= 0");
    if (!(curvature >= 0.0)) throw Error("curvature must be >= 0");
    if (!(speed_scale > 0.0)) throw Error("speed_scale must be positive");
}

void to_json(nlohmann::json& j, const SceneConfig& cfg) {
    j = nlohmann::json{{"height", cfg.height},
                       {"width", cfg.width},
                       {"num_frames_observed", cfg.num_frames_observed},
                       {"num_frames_future", cfg.num_frames_future},
                       {"num_objects", cfg.num_objects},
                       {"verb_set", cfg.verb_set},
                       {"noun_set", cfg.noun_set},
                       {"camera_motion", camera_to_string(cfg.camera_motion)},
                       {"noise_level", cfg.noise_level},
                       {"curvature", cfg.curvature},
                       {"speed_scale", cfg.speed_scale},
                       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, SceneConfig& cfg) {
    SceneConfig d;
    if (j.contains("frame_size")) {
        const auto fs = j.at("frame_size").get<std::vector<int>>();
        if (fs.size() != 2) throw Error("frame_size must be [H, W]");
        d.height = fs[0];
        d.width = fs[1];
    }
    d.height = j.value("height", d.height);
    d.width = j.value("width", d.width);
    d.num_frames_observed = j.value("num_frames_observed", d.num_frames_observed);
    d.num_frames_future = j.value("num_frames_future", d.num_frames_future);
    d.num_objects = j.value("num_objects", d.num_objects);
    d.verb_set = j.value("verb_set", d.verb_set);
    d.noun_set = j.value("noun_set", d.noun_set);
    d.camera_motion = camera_from_string(j.value("camera_motion", std::string("none")));
    d.noise_level = j.value("noise_level", d.noise_level);
    d.curvature = j.value("curvature", d.curvature);
    d.speed_scale = j.value("speed_scale", d.speed_scale);
    d.seed = j.value("seed", d.seed);
    cfg = d;
}

ActionSpace::ActionSpace(std::vector<int> verbs, std::vector<int> nouns) : verbs_(std::move(verbs)), nouns_(std::move(nouns)) {
    if (verbs_.empty() || nouns_.empty()) throw Error("action space needs verbs and nouns");
}

ActionLabel ActionSpace::encode(int verb_id, int noun_id) const {
    const int vi = index_of(verbs_, verb_id);
    const int ni = index_of(nouns_, noun_id);
    if (vi < 0 || ni < 0) throw Error("verb/noun outside the configured sets");
    return {verb_id, noun_id, vi * static_cast<int>(nouns_.size()) + ni};
}

ActionLabel ActionSpace::decode(int action_id) const {
    if (action_id < 0 || action_id >= size()) throw Error("action id out of range");
    const int n = static_cast<int>(nouns_.size());
    return {verbs_[static_cast<std::size_t>(action_id / n)], nouns_[static_cast<std::size_t>(action_id % n)], action_id};
}

bool operator==(const VideoClip& a, const VideoClip& b) {
    return a.frames_count == b.frames_count && a.height == b.height && a.width == b.width &&
           a.channels == b.channels && a.frames == b.frames && a.label == b.label &&
           a.future_trajectory == b.future_trajectory && a.observed_trajectory == b.observed_trajectory &&
           a.hotspot_point == b.hotspot_point && a.camera_motions == b.camera_motions;
}

GeneratedScene generate_scene(const SceneConfig& cfg, std::uint64_t seed, std::optional<ActionLabel> forced_label,
                              bool render) {
    cfg.validate();
    const ActionSpace space(cfg);
    Rng rng = Rng::stream(seed, 0x5ce11eULL);

    ActionLabel label;
    if (forced_label) {
        label = space.encode(forced_label->verb_id, forced_label->noun_id);
    } else {
        label = space.decode(static_cast<int>(rng.index(static_cast<std::uint64_t>(space.size()))));
    }

    const int observed = cfg.num_frames_observed;
    const int total = observed + cfg.num_frames_future;
    const double scale_px = std::min(cfg.height, cfg.width);
    const double obj_rx = kObjectRadius * scale_px / cfg.width;
    const double obj_ry = kObjectRadius * scale_px / cfg.height;
    const double hand_mx = (kHandRadius * scale_px + 1.0) / cfg.width;
    const double hand_my = (kHandRadius * scale_px + 1.0) / cfg.height;

    const double base_speed = kVerbSpeed[static_cast<std::size_t>(label.verb_id)] * cfg.speed_scale;
    if (base_speed * (1.0 + kSpeedJitter) * (total - 1) > 1.0 - 2.0 * std::max(hand_mx, hand_my)) {
        throw Error("hand path would exit the frame: speed_scale too large for the clip length");
    }

    GeneratedScene scene;
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
        // Objects: the target carries the label noun, distractors other distinct nouns.
        std::vector<int> distractors;
        for (int n : cfg.noun_set) {
            if (n != label.noun_id) distractors.push_back(n);
        }
        for (std::size_t i = distractors.size(); i > 1; --i) std::swap(distractors[i - 1], distractors[rng.index(i)]);
        std::vector<SceneObject> objects;
        objects.push_back({label.noun_id, {}, kObjectRadius * scale_px});
        for (int i = 1; i < cfg.num_objects; ++i) {
            objects.push_back({distractors[static_cast<std::size_t>(i - 1)], {}, kObjectRadius * scale_px});
        }
        bool ok = true;
        for (std::size_t i = 0; i < objects.size() && ok; ++i) {
            bool found = false;
            for (int tries = 0; tries < 100 && !found; ++tries) {
                const Point2 c{rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)};
                found = true;
                for (std::size_t j = 0; j < i; ++j) {
                    const double dx = (c.x - objects[j].center.x) * cfg.width;
                    const double dy = (c.y - objects[j].center.y) * cfg.height;
                    if (std::hypot(dx, dy) < 2.8 * objects[i].radius) found = false;
                }
                if (found) objects[i].center = c;
            }
            ok = found;
        }
        if (!ok) continue;
        // Random placement order: the target is not always object 0 on screen.
        const std::size_t target_slot = rng.index(objects.size());
        std::swap(objects[0], objects[target_slot]);

        const Eigen::Matrix3d camera_step = sample_camera_step(cfg.camera_motion, rng);

        const double speed = base_speed * (1.0 + rng.uniform(-kSpeedJitter, kSpeedJitter));
        const double path_length = speed * (total - 1);
        const double approach = rng.uniform(0.0, 2.0 * M_PI);
        const double bend = rng.uniform(-cfg.curvature, cfg.curvature);
        const SceneObject& target = objects[target_slot];
        const Point2 contact{target.center.x + kContactOffset * obj_rx * std::cos(approach),
                             target.center.y + kContactOffset * obj_ry * std::sin(approach)};
        const Point2 dir{std::cos(approach), std::sin(approach)};
        auto make_curve = [&](double chord) {
            const Point2 start{contact.x + chord * dir.x, contact.y + chord * dir.y};
            const Point2 mid{0.5 * (start.x + contact.x), 0.5 * (start.y + contact.y)};
            const Point2 ctrl{mid.x - bend * chord * dir.y, mid.y + bend * chord * dir.x};
            return Bezier{start, ctrl, contact};
        };
        const double unit_length = bezier_length(make_curve(1.0));
        const Bezier curve = make_curve(path_length / unit_length);
        Trajectory hand = sample_constant_speed(curve, total);

        // Camera poses: world -> image of frame k.
        std::vector<Eigen::Matrix3d> pose(static_cast<std::size_t>(total));
        pose[0] = Eigen::Matrix3d::Identity();
        for (int k = 1; k < total; ++k) pose[static_cast<std::size_t>(k)] = camera_step * pose[static_cast<std::size_t>(k - 1)];

        for (int k = 0; k < total && ok; ++k) {
            ok = inside(priors::apply_homography(pose[static_cast<std::size_t>(k)], hand[static_cast<std::size_t>(k)]),
                        hand_mx, hand_my);
        }
        const Eigen::Matrix3d& last_pose = pose[static_cast<std::size_t>(observed - 1)];
        const Point2 hotspot = priors::apply_homography(last_pose, contact);
        if (!ok || !inside(hotspot, 0.0, 0.0)) continue;

        VideoClip& clip = scene.clip;
        clip.frames_count = observed;
        clip.height = cfg.height;
        clip.width = cfg.width;
        clip.channels = 3;
        clip.label = label;
        clip.hotspot_point = hotspot;
        clip.camera_motions.assign(static_cast<std::size_t>(total - 1), camera_step);
        clip.observed_trajectory.clear();
        for (int k = 0; k < observed; ++k) {
            clip.observed_trajectory.push_back(priors::apply_homography(last_pose, hand[static_cast<std::size_t>(k)]));
        }
        // Future positions as seen in their own frames, projected back through the camera motion.
        Trajectory future_in_frame;
        for (int k = observed; k < total; ++k) {
            future_in_frame.push_back(
                priors::apply_homography(pose[static_cast<std::size_t>(k)], hand[static_cast<std::size_t>(k)]));
        }
        const std::span<const Eigen::Matrix3d> future_steps(clip.camera_motions.data() + (observed - 1),
                                                            static_cast<std::size_t>(cfg.num_frames_future));
        clip.future_trajectory = priors::project_trajectory(future_in_frame, future_steps);

        scene.objects = std::move(objects);
        scene.target_index = static_cast<int>(target_slot);
        scene.hand_world = std::move(hand);
        placed = true;

        if (render) {
            const double phase_x = rng.uniform(0.0, 2.0 * M_PI);
            const double phase_y = rng.uniform(0.0, 2.0 * M_PI);
            const double hand_r = kHandRadius * scale_px;
            clip.frames.assign(static_cast<std::size_t>(observed) * cfg.height * cfg.width * 3, 0.0f);
            for (int k = 0; k < observed; ++k) {
                const Eigen::Matrix3d inv = pose[static_cast<std::size_t>(k)].inverse();
                const Point2 hand_k = scene.hand_world[static_cast<std::size_t>(k)];
                for (int r = 0; r < cfg.height; ++r) {
                    for (int c = 0; c < cfg.width; ++c) {
                        const Point2 w = priors::apply_homography(inv, {(c + 0.5) / cfg.width, (r + 0.5) / cfg.height});
                        const double shade = 0.42 + 0.06 * std::sin(2.0 * M_PI * 1.3 * w.x + phase_x) *
                                                        std::cos(2.0 * M_PI * 1.1 * w.y + phase_y);
                        std::array<double, 3> rgb{shade, shade, shade};
                        auto blend = [&](const std::array<float, 3>& color, double alpha) {
                            for (int ch = 0; ch < 3; ++ch) rgb[ch] += alpha * (color[ch] - rgb[ch]);
                        };
                        for (const SceneObject& obj : scene.objects) {
                            const double dx = (w.x - obj.center.x) * cfg.width;
                            const double dy = (w.y - obj.center.y) * cfg.height;
                            const auto& look = kNouns[static_cast<std::size_t>(obj.noun_id)];
                            blend(look.color, std::clamp(0.5 - signed_distance(look.shape, dx, dy, obj.radius), 0.0, 1.0));
                        }
                        const double hd = std::hypot((w.x - hand_k.x) * cfg.width, (w.y - hand_k.y) * cfg.height);
                        blend(kHandColor, std::clamp(0.5 - (hd - hand_r), 0.0, 1.0));
                        for (int ch = 0; ch < 3; ++ch) {
                            const double v = rgb[ch] + (cfg.noise_level > 0.0 ? rng.normal(0.0, cfg.noise_level) : 0.0);
                            clip.frames[static_cast<std::size_t>(((k * cfg.height + r) * cfg.width + c) * 3 + ch)] =
                                static_cast<float>(std::clamp(v, 0.0, 1.0));
                        }
                    }
                }
            }
        }
    }
    if (!placed) throw Error("hand path would exit the frame: no valid scene layout for this configuration");
    return scene;
}

VideoClip generate_clip(const SceneConfig& cfg, std::uint64_t seed, std::optional<ActionLabel> forced_label) {
    return generate_scene(cfg, seed, forced_label, true).clip;
}

std::vector<unsigned char> encode_clip(const VideoClip& clip) {
    io::ByteWriter w;
    w.magic("MACL");
    w.put(kClipFormatVersion);
    w.put(static_cast<std::uint32_t>(clip.frames_count));
    w.put(static_cast<std::uint32_t>(clip.height));
    w.put(static_cast<std::uint32_t>(clip.width));
    w.put(static_cast<std::uint32_t>(clip.channels));
    w.put(static_cast<std::uint32_t>(clip.future_trajectory.size()));
    w.put(static_cast<std::uint32_t>(clip.observed_trajectory.size()));
    w.put(static_cast<std::uint32_t>(clip.camera_motions.size()));
    w.put(static_cast<std::int32_t>(clip.label.verb_id));
    w.put(static_cast<std::int32_t>(clip.label.noun_id));
    w.put(static_cast<std::int32_t>(clip.label.action_id));
    w.put_all<float>(clip.frames);
    for (const auto& p : clip.future_trajectory) {
        w.put(p.x);
        w.put(p.y);
    }
    for (const auto& p : clip.observed_trajectory) {
        w.put(p.x);
        w.put(p.y);
    }
    w.put(clip.hotspot_point.x);
    w.put(clip.hotspot_point.y);
    for (const auto& h : clip.camera_motions) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) w.put(h(r, c));
        }
    }
    return w.bytes();
}

VideoClip decode_clip(std::span<const unsigned char> bytes) {
    io::ByteReader r(bytes, "corrupt clip: truncated data");
    if (!r.magic("MACL")) throw Error("corrupt clip: bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kClipFormatVersion) {
        throw Error("unsupported clip format version: expected " + std::to_string(kClipFormatVersion) + ", found " +
                    std::to_string(version));
    }
    VideoClip clip;
    clip.frames_count = static_cast<int>(r.get<std::uint32_t>());
    clip.height = static_cast<int>(r.get<std::uint32_t>());
    clip.width = static_cast<int>(r.get<std::uint32_t>());
    clip.channels = static_cast<int>(r.get<std::uint32_t>());
    const auto n_future = r.get<std::uint32_t>();
    const auto n_observed = r.get<std::uint32_t>();
    const auto n_motion = r.get<std::uint32_t>();
    clip.label.verb_id = r.get<std::int32_t>();
    clip.label.noun_id = r.get<std::int32_t>();
    clip.label.action_id = r.get<std::int32_t>();

    const std::uint64_t n_pixels = static_cast<std::uint64_t>(clip.frames_count) * clip.height * clip.width * clip.channels;
    const std::uint64_t expected = n_pixels * 4 + (static_cast<std::uint64_t>(n_future) + n_observed + 1) * 16 +
                                   static_cast<std::uint64_t>(n_motion) * 72;
    if (r.remaining() != expected) {
        throw Error("corrupt clip: dimension mismatch (header implies " + std::to_string(expected) +
                    " payload bytes, found " + std::to_string(r.remaining()) + ")");
    }
    clip.frames = r.get_all<float>(static_cast<std::size_t>(n_pixels));
    auto read_points = [&](std::uint32_t n) {
        Trajectory t(n);
        for (auto& p : t) {
            p.x = r.get<double>();
            p.y = r.get<double>();
        }
        return t;
    };
    clip.future_trajectory = read_points(n_future);
    clip.observed_trajectory = read_points(n_observed);
    clip.hotspot_point.x = r.get<double>();
    clip.hotspot_point.y = r.get<double>();
    clip.camera_motions.resize(n_motion);
    for (auto& h : clip.camera_motions) {
        for (int row = 0; row < 3; ++row) {
            for (int col = 0; col < 3; ++col) h(row, col) = r.get<double>();
        }
    }
    return clip;
}

void save_clip(const VideoClip& clip, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_clip(clip));
}

VideoClip load_clip(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return decode_clip(bytes);
}

std::string to_string(Split s) { return s == Split::train ? "train" : "val"; }

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    throw Error("unknown split '" + s + "'");
}

std::vector<const ManifestEntry*> DatasetManifest::split(Split s) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : clips) {
        if (e.split == s) out.push_back(&e);
    }
    return out;
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
    nlohmann::json clips = nlohmann::json::array();
    for (const auto& e : m.clips) {
        nlohmann::json entry{{"path", e.path},
                             {"split", to_string(e.split)},
                             {"seed", e.seed},
                             {"verb", e.label.verb_id},
                             {"noun", e.label.noun_id},
                             {"action", e.label.action_id},
                             {"checksum", e.checksum}};
        if (!e.priors_path.empty()) entry["priors"] = e.priors_path;
        clips.push_back(std::move(entry));
    }
    j = nlohmann::json{{"format_version", m.format_version},
                       {"generator", m.generator},
                       {"with_priors", m.with_priors},
                       {"class_counts", m.class_counts},
                       {"clips", std::move(clips)}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<std::uint32_t>();
    if (m.format_version != kManifestFormatVersion) {
        throw Error("unsupported manifest format version: expected " + std::to_string(kManifestFormatVersion) +
                    ", found " + std::to_string(m.format_version));
    }
    m.generator = j.at("generator").get<SceneConfig>();
    m.with_priors = j.value("with_priors", false);
    m.class_counts = j.at("class_counts").get<std::vector<int>>();
    for (const auto& c : j.at("clips")) {
        ManifestEntry e;
        e.path = c.at("path").get<std::string>();
        e.split = split_from_string(c.at("split").get<std::string>());
        e.seed = c.at("seed").get<std::uint64_t>();
        e.label = {c.at("verb").get<int>(), c.at("noun").get<int>(), c.at("action").get<int>()};
        e.checksum = c.value("checksum", std::string());
        e.priors_path = c.value("priors", std::string());
        m.clips.push_back(std::move(e));
    }
    return m;
}

std::uint64_t clip_seed(const SceneConfig& cfg, Split s, std::size_t index) {
    const std::uint64_t base = cfg.seed << 32;
    return base + (s == Split::val ? (1ULL << 31) : 0ULL) + index;
}

int worker_threads(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* cap = std::getenv("MOTOR_ANTICIPATE_THREADS")) {
        const int limit = std::atoi(cap);
        if (limit > 0) n = std::min(n, limit);
    }
    return std::max(1, n);
}

std::vector<unsigned char> encode_priors(const AttentionVolume& motor, const HotspotMap& hotspot) {
    io::ByteWriter w;
    w.magic("MAPR");
    w.put(kClipFormatVersion);
    w.put(static_cast<std::uint32_t>(motor.grid.t));
    w.put(static_cast<std::uint32_t>(motor.grid.h));
    w.put(static_cast<std::uint32_t>(motor.grid.w));
    w.put(static_cast<std::uint32_t>(hotspot.grid.h));
    w.put(static_cast<std::uint32_t>(hotspot.grid.w));
    w.put_all<double>(motor.probs);
    w.put_all<double>(hotspot.probs);
    return w.bytes();
}

ClipPriors decode_priors(std::span<const unsigned char> bytes) {
    io::ByteReader r(bytes, "corrupt priors file");
    if (!r.magic("MAPR")) throw Error("corrupt priors file: bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kClipFormatVersion) {
        throw Error("unsupported priors format version: expected " + std::to_string(kClipFormatVersion) + ", found " +
                    std::to_string(version));
    }
    const auto t = static_cast<int>(r.get<std::uint32_t>());
    const auto h = static_cast<int>(r.get<std::uint32_t>());
    const auto w = static_cast<int>(r.get<std::uint32_t>());
    const auto ah = static_cast<int>(r.get<std::uint32_t>());
    const auto aw = static_cast<int>(r.get<std::uint32_t>());
    if (t < 1 || h < 1 || w < 1 || ah < 1 || aw < 1 || t > 4096 || h > 4096 || w > 4096 || ah > 4096 || aw > 4096) {
        throw Error("corrupt priors file: bad grid");
    }
    ClipPriors p;
    p.motor = AttentionVolume({t, h, w});
    p.hotspot = HotspotMap({ah, aw});
    p.motor.probs = r.get_all<double>(p.motor.probs.size());
    p.hotspot.probs = r.get_all<double>(p.hotspot.probs.size());
    if (r.remaining() != 0) throw Error("corrupt priors file: trailing bytes");
    return p;
}

ClipPriors load_priors(const std::filesystem::path& path) { return decode_priors(io::read_file(path)); }

DatasetManifest generate_dataset(const SceneConfig& cfg, int n_train, int n_val, const std::filesystem::path& out_dir,
                                 const DatasetOptions& options) {
    cfg.validate();
    if (n_train <= 0 || n_val <= 0) throw Error("empty split: n_train and n_val must be positive");
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "clips", ec);
    if (ec) throw Error("cannot create " + (out_dir / "clips").string() + ": " + ec.message());

    const ActionSpace space(cfg);
    DatasetManifest manifest;
    manifest.generator = cfg;
    manifest.with_priors = options.with_priors;
    manifest.class_counts.assign(static_cast<std::size_t>(space.size()), 0);
    const std::size_t total = static_cast<std::size_t>(n_train) + static_cast<std::size_t>(n_val);
    manifest.clips.resize(total);
    for (std::size_t i = 0; i < total; ++i) {
        ManifestEntry& e = manifest.clips[i];
        const bool is_train = i < static_cast<std::size_t>(n_train);
        const std::size_t local = is_train ? i : i - static_cast<std::size_t>(n_train);
        e.split = is_train ? Split::train : Split::val;
        e.seed = clip_seed(cfg, e.split, local);
        // Round-robin class assignment keeps every split balanced.
        e.label = space.decode(static_cast<int>(local % static_cast<std::size_t>(space.size())));
        char name[64];
        std::snprintf(name, sizeof name, "clips/clip_%06zu.bin", i);
        e.path = name;
        if (options.with_priors) {
            std::snprintf(name, sizeof name, "clips/clip_%06zu.priors.bin", i);
            e.priors_path = name;
        }
        manifest.class_counts[static_cast<std::size_t>(e.label.action_id)] += 1;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::string> errors(total);
    auto work = [&] {
        for (std::size_t i = next++; i < total; i = next++) {
            ManifestEntry& e = manifest.clips[i];
            try {
                const VideoClip clip = generate_clip(cfg, e.seed, e.label);
                const auto bytes = encode_clip(clip);
                io::write_file_atomic(out_dir / e.path, bytes);
                e.checksum = io::checksum_hex(bytes);
                if (options.with_priors) {
                    const auto motor = priors::render_trajectory_prior(clip.future_trajectory, options.motor_grid,
                                                                       options.prior_sigma);
                    const auto hotspot =
                        priors::render_point_prior(clip.hotspot_point, options.hotspot_grid, options.prior_sigma);
                    io::write_file_atomic(out_dir / e.priors_path, encode_priors(motor, hotspot));
                }
            } catch (const std::exception& ex) {
                errors[i] = ex.what();
            }
        }
    };
    const int n_workers = std::min<int>(worker_threads(options.threads), static_cast<int>(total));
    {
        std::vector<std::jthread> pool;
        for (int w = 1; w < n_workers; ++w) pool.emplace_back(work);
        work();
    }
    for (std::size_t i = 0; i < total; ++i) {
        if (!errors[i].empty()) throw Error("clip " + std::to_string(i) + ": " + errors[i]);
    }

    const nlohmann::json j = manifest;
    const std::string text = j.dump(2) + "\n";
    io::write_file_atomic(out_dir / "manifest.json",
                          std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
    return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw Error("malformed manifest " + path.string() + ": " + ex.what());
    }
    DatasetManifest m = manifest_from_json(j);
    for (const auto& e : m.clips) {
        if (!std::filesystem::exists(dir / e.path)) throw Error("manifest lists missing clip " + e.path);
    }
    return m;
}

}  // namespace motorattn::synth
