#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace motorattn {

/// Raised for every contract violation, corrupt input and runtime failure in the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Point in normalized image coordinates: x grows to the right, y grows downwards, both in [0,1].
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Ordered hand positions, one per frame.
using Trajectory = std::vector<Point2>;

struct Grid2 {
    int h = 1;
    int w = 1;

    [[nodiscard]] int cells() const { return h * w; }
    friend bool operator==(const Grid2&, const Grid2&) = default;
};

struct Grid3 {
    int t = 1;
    int h = 1;
    int w = 1;

    [[nodiscard]] int slice_cells() const { return h * w; }
    [[nodiscard]] int cells() const { return t * h * w; }
    [[nodiscard]] Grid2 spatial() const { return {h, w}; }
    friend bool operator==(const Grid3&, const Grid3&) = default;
};

/// 2D probability map on the last observable frame, row-major.
struct HotspotMap {
    Grid2 grid;
    std::vector<double> probs;

    HotspotMap() = default;
    explicit HotspotMap(Grid2 g, double fill = 0.0)
        : grid(g), probs(static_cast<std::size_t>(g.cells()), fill) {}

    double& at(int r, int c) { return probs[static_cast<std::size_t>(r * grid.w + c)]; }
    [[nodiscard]] double at(int r, int c) const { return probs[static_cast<std::size_t>(r * grid.w + c)]; }
};

/// Spatiotemporal attention: `probs` holds M (each temporal slice sums to one) and `psi` the
/// joint softmax over all cells it was derived from. Prior volumes leave `psi` empty.
struct AttentionVolume {
    Grid3 grid;
    std::vector<double> probs;
    std::vector<double> psi;

    AttentionVolume() = default;
    explicit AttentionVolume(Grid3 g, double fill = 0.0)
        : grid(g), probs(static_cast<std::size_t>(g.cells()), fill) {}

    double& at(int t, int r, int c) {
        return probs[static_cast<std::size_t>((t * grid.h + r) * grid.w + c)];
    }
    [[nodiscard]] double at(int t, int r, int c) const {
        return probs[static_cast<std::size_t>((t * grid.h + r) * grid.w + c)];
    }
    [[nodiscard]] HotspotMap slice(int t) const;
};

inline HotspotMap AttentionVolume::slice(int t) const {
    HotspotMap out(grid.spatial());
    const auto n = static_cast<std::size_t>(grid.slice_cells());
    const auto offset = static_cast<std::size_t>(t) * n;
    for (std::size_t i = 0; i < n; ++i) out.probs[i] = probs[offset + i];
    return out;
}

/// Center of grid cell (r, c) in normalized coordinates.
inline Point2 cell_center(Grid2 g, int r, int c) {
    return {(c + 0.5) / g.w, (r + 0.5) / g.h};
}

}  // namespace motorattn
