#include "motorattn/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "motorattn/metrics.hpp"

namespace motorattn::visualize {

Image::Image(int w, int h, Rgb fill) : width(w), height(h) {
    if (w < 1 || h < 1) throw Error("image dimensions must be positive");
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) set(x, y, fill);
    }
}

Rgb Image::at(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
    const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
    pixels[i] = c.r;
    pixels[i + 1] = c.g;
    pixels[i + 2] = c.b;
}

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

// Blue -> cyan -> yellow -> red ramp.
std::array<double, 3> colormap(double v) {
    v = std::clamp(v, 0.0, 1.0);
    if (v < 1.0 / 3.0) return {0.0, 3.0 * v, 1.0};
    if (v < 2.0 / 3.0) return {3.0 * (v - 1.0 / 3.0), 1.0, 1.0 - 3.0 * (v - 1.0 / 3.0)};
    return {1.0, 1.0 - 3.0 * (v - 2.0 / 3.0), 0.0};
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

Image frame_image(const synth::VideoClip& clip, int t, int scale) {
    if (t < 0 || t >= clip.frames_count) throw Error("frame index out of range");
    if (scale < 1) throw Error("scale must be >= 1");
    Image img(clip.width * scale, clip.height * scale);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const int r = y / scale, c = x / scale;
            if (clip.channels >= 3) {
                img.set(x, y, {to_byte(clip.pixel(t, r, c, 0)), to_byte(clip.pixel(t, r, c, 1)), to_byte(clip.pixel(t, r, c, 2))});
            } else {
                const auto v = to_byte(clip.pixel(t, r, c, 0));
                img.set(x, y, {v, v, v});
            }
        }
    }
    return img;
}

Image heatmap_overlay(const Image& base, const HotspotMap& map, double alpha) {
    double peak = 0.0;
    for (double v : map.probs) peak = std::max(peak, v);
    Image out = base;
    for (int y = 0; y < base.height; ++y) {
        for (int x = 0; x < base.width; ++x) {
            const int r = y * map.grid.h / base.height;
            const int c = x * map.grid.w / base.width;
            const auto col = colormap(peak > 0.0 ? map.at(r, c) / peak : 0.0);
            const Rgb b = base.at(x, y);
            out.set(x, y, {to_byte((1 - alpha) * b.r / 255.0 + alpha * col[0]),
                           to_byte((1 - alpha) * b.g / 255.0 + alpha * col[1]),
                           to_byte((1 - alpha) * b.b / 255.0 + alpha * col[2])});
        }
    }
    return out;
}

std::array<int, 2> marker_pixel(const AttentionVolume& vol, int t, int width, int height) {
    const Grid2 g = vol.grid.spatial();
    const int cell = metrics::argmax_cell(vol, t);
    const Point2 p = cell_center(g, cell / g.w, cell % g.w);
    return {static_cast<int>(std::floor(p.x * width)), static_cast<int>(std::floor(p.y * height))};
}

Image trajectory_overlay(const Image& base, const AttentionVolume& vol) {
    Image out = base;
    const Grid2 g = vol.grid.spatial();
    // Half-width strictly inside the cell so each marker identifies exactly one cell.
    const int half = std::max(0, std::min(base.width / g.w, base.height / g.h) / 2 - 1);
    for (int t = 0; t < vol.grid.t; ++t) {
        const auto [cx, cy] = marker_pixel(vol, t, base.width, base.height);
        const Rgb color = kSliceColors[static_cast<std::size_t>(t) % kSliceColors.size()];
        for (int y = std::max(0, cy - half); y <= std::min(base.height - 1, cy + half - 1); ++y) {
            for (int x = std::max(0, cx - half); x <= std::min(base.width - 1, cx + half - 1); ++x) out.set(x, y, color);
        }
        out.set(cx, cy, color);
    }
    return out;
}

void write_png(const Image& image, const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
    if (!file) throw Error("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("failed to encode " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y) {
        png_write_row(png, image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
    if (!file) throw Error("cannot open " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) throw Error("not a PNG file: " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng initialization failed");
    }
    Image img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("corrupt PNG file: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y) png_read_row(png, img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace motorattn::visualize
