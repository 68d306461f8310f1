// Dense 2D grids and multi-channel images, the carriers for pixels,
// feature maps, and kernel slices.
#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "orderness/errors.hpp"

namespace orderness {

struct Grid2D {
    int height = 0;
    int width = 0;
    std::vector<double> values; // row-major, height*width

    Grid2D() = default;
    Grid2D(int h, int w) : height(h), width(w), values(static_cast<size_t>(h) * w, 0.0) {
        require(h > 0 && w > 0, Err::InvalidArgument, "grid dimensions must be positive");
    }
    Grid2D(int h, int w, std::vector<double> v) : height(h), width(w), values(std::move(v)) {
        require(h > 0 && w > 0, Err::InvalidArgument, "grid dimensions must be positive");
        require(values.size() == static_cast<size_t>(h) * w, Err::ShapeMismatch,
                "grid value count does not match height*width");
    }

    double& at(int r, int c) { return values[static_cast<size_t>(r) * width + c]; }
    double at(int r, int c) const { return values[static_cast<size_t>(r) * width + c]; }
    size_t size() const { return values.size(); }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Non-owning view of one channel plane; Grid2D converts implicitly.
struct GridView {
    const double* data = nullptr;
    int height = 0;
    int width = 0;

    GridView() = default;
    GridView(const double* d, int h, int w) : data(d), height(h), width(w) {}
    GridView(const Grid2D& g) : data(g.values.data()), height(g.height), width(g.width) {}

    double at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
};

// Multi-channel image, channel-planar storage.
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values; // [channel][row][col]

    Image() = default;
    Image(int c, int h, int w)
        : channels(c), height(h), width(w), values(static_cast<size_t>(c) * h * w, 0.0) {
        require(c > 0 && h > 0 && w > 0, Err::InvalidArgument, "image dimensions must be positive");
    }

    size_t plane_size() const { return static_cast<size_t>(height) * width; }
    double* plane(int c) { return values.data() + static_cast<size_t>(c) * plane_size(); }
    const double* plane(int c) const { return values.data() + static_cast<size_t>(c) * plane_size(); }

    GridView channel_view(int c) const { return GridView(plane(c), height, width); }
    Grid2D channel_copy(int c) const {
        return Grid2D(height, width,
                      std::vector<double>(plane(c), plane(c) + plane_size()));
    }
    double& at(int c, int r, int col) { return values[static_cast<size_t>(c) * plane_size() + static_cast<size_t>(r) * width + col]; }
    double at(int c, int r, int col) const { return values[static_cast<size_t>(c) * plane_size() + static_cast<size_t>(r) * width + col]; }

    static Image from_grid(const Grid2D& g) {
        Image im(1, g.height, g.width);
        im.values = g.values;
        return im;
    }
};

} // namespace orderness
