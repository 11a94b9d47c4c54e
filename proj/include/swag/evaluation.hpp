#pragma once

#include "swag/data_io.hpp"
#include "swag/scene.hpp"

#include <string>
#include <vector>

namespace swag {

struct ImageMetrics {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalReport {
    std::vector<ImageMetrics> images;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;

    std::string to_json() const;
};

struct EvalOptions {
    int fit_iterations = 200;
    double lr = 2.5e-3;
    bool quantize = true;
    // Compare against the clean reference when the dataset has one.
    bool use_clean = true;
};

/// Left/right protocol: fit an embedding on the left half of each test image,
/// render in eval mode and score the right half.
EvalReport evaluate_test_set(const Scene &scene, const Dataset &data, const EvalOptions &options = {});

/// Scores full renders of the training views with their learned embeddings.
/// With `static_only`, Gaussians classified transient at `lambda` are dropped.
EvalReport evaluate_training_views(const Scene &scene, const Dataset &data, bool static_only = false,
                                   double lambda = 0.0, bool against_clean = false, bool quantize = true);

constexpr int kHistogramBins = 50;
constexpr double kHistogramLogMin = -12.0;
constexpr double kHistogramLogMax = 0.0;

struct TransientCensus {
    std::size_t static_count = 0;
    std::size_t transient_count = 0;
    double lambda = 0.0;
    // Bin b covers log10(variance) in [min + b*w, min + (b+1)*w); values
    // outside the range land in the first or last bin.
    std::vector<std::size_t> histogram;
    std::vector<double> bin_edges; // kHistogramBins + 1 log10 edges

    double transient_fraction() const;
    std::string to_json() const;
};

TransientCensus transient_census(std::span<const double> variances, double lambda);

} // namespace swag
