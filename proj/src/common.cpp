#include "swag/image.hpp"
#include "swag/parallel.hpp"
#include "swag/random.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace swag {

Image crop_columns(const Image &img, int x0, int x1) {
    x0 = std::clamp(x0, 0, img.width);
    x1 = std::clamp(x1, x0, img.width);
    Image out(x1 - x0, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = x0; x < x1; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(x - x0, y, c) = img.at(x, y, c);
            }
        }
    }
    return out;
}

Image quantize_8bit(const Image &img) {
    Image out = img;
    for (double &v : out.data) {
        v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    }
    return out;
}

double CounterRng::normal() {
    // Box-Muller; one value per call keeps the stream stateless.
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

namespace {
int g_threads = 0;
}

void set_thread_count(int n) {
    g_threads = std::max(0, n);
#ifdef _OPENMP
    if (g_threads > 0) {
        omp_set_num_threads(g_threads);
    }
#endif
}

int thread_count() {
#ifdef _OPENMP
    return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)> &fn) {
#ifdef _OPENMP
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count())
    for (long long i = 0; i < count; ++i) {
        fn(static_cast<std::size_t>(i));
    }
#else
    for (std::size_t i = 0; i < n; ++i) {
        fn(i);
    }
#endif
}

} // namespace swag
