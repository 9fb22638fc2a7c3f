#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "motorattn/synth.hpp"
#include "motorattn/types.hpp"

namespace motorattn::visualize {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB image, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, Rgb fill = {});

    [[nodiscard]] Rgb at(int x, int y) const;
    void set(int x, int y, Rgb c);
};

/// Trajectory marker colours in slice order: yellow, green, cyan, magenta (then repeating).
inline constexpr std::array<Rgb, 4> kSliceColors{{{255, 255, 0}, {0, 255, 0}, {0, 255, 255}, {255, 0, 255}}};

/// Frame `t` of a clip, upscaled by an integer factor.
Image frame_image(const synth::VideoClip& clip, int t, int scale = 4);

/// Blends a colour-mapped probability map over `base` (nearest-neighbour upsampling).
Image heatmap_overlay(const Image& base, const HotspotMap& map, double alpha = 0.55);

/// Pixel at the centre of the argmax cell of slice `t`.
std::array<int, 2> marker_pixel(const AttentionVolume& vol, int t, int width, int height);

/// Square markers at every slice's argmax cell, drawn in slice order. Markers stay inside their cell.
Image trajectory_overlay(const Image& base, const AttentionVolume& vol);

void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

}  // namespace motorattn::visualize
