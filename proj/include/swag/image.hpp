#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace swag {

/// Interleaved RGB image with linear double values, row-major (y, x, channel).
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0) : width(w), height(h), data(std::size_t(w) * h * 3, fill) {}

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    bool empty() const { return data.empty(); }

    double &at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * 3 + c]; }

    Eigen::Vector3d pixel(int x, int y) const {
        const double *p = &data[(std::size_t(y) * width + x) * 3];
        return {p[0], p[1], p[2]};
    }
    void set_pixel(int x, int y, const Eigen::Vector3d &v) {
        double *p = &data[(std::size_t(y) * width + x) * 3];
        p[0] = v.x();
        p[1] = v.y();
        p[2] = v.z();
    }

    bool same_shape(const Image &o) const { return width == o.width && height == o.height; }
};

// Columns [x0, x1) of `img`.
Image crop_columns(const Image &img, int x0, int x1);

// Round every value to the nearest of 256 levels in [0,1].
Image quantize_8bit(const Image &img);

/// First column of the right half in the left/right evaluation protocol.
inline int split_column(int width) { return (width + 1) / 2; }

} // namespace swag
