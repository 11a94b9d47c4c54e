#include "swag/evaluation.hpp"
#include "swag/metrics.hpp"
#include "swag/trainer.hpp"
#include "swag/transient.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace swag {

using nlohmann::json;

namespace {

void finish(EvalReport &report) {
    if (report.images.empty()) {
        return;
    }
    double p = 0.0, s = 0.0;
    for (const auto &m : report.images) {
        p += m.psnr;
        s += m.ssim;
    }
    report.mean_psnr = p / double(report.images.size());
    report.mean_ssim = s / double(report.images.size());
}

} // namespace

std::string EvalReport::to_json() const {
    json j;
    j["mean_psnr"] = mean_psnr;
    j["mean_ssim"] = mean_ssim;
    j["images"] = json::array();
    for (const auto &m : images) {
        j["images"].push_back({{"id", m.name}, {"psnr", m.psnr}, {"ssim", m.ssim}});
    }
    return j.dump(2);
}

EvalReport evaluate_test_set(const Scene &scene, const Dataset &data, const EvalOptions &options) {
    EvalReport report;
    for (int t : data.test) {
        const ImageRecord &rec = data.images.at(t);
        const Image &target = options.use_clean && rec.clean ? *rec.clean : rec.image;
        const int split = split_column(target.width);
        const Image left = crop_columns(target, 0, split);
        const std::vector<double> emb =
            fit_test_embedding(scene, rec.camera, left, options.fit_iterations, options.lr);
        Image full = scene.render_image(emb, rec.camera);
        if (options.quantize) {
            full = quantize_8bit(full);
        }
        const Image pred = crop_columns(full, split, full.width);
        const Image truth = crop_columns(target, split, target.width);
        report.images.push_back({rec.name, psnr(pred, truth), ssim(pred, truth)});
    }
    finish(report);
    return report;
}

EvalReport evaluate_training_views(const Scene &scene, const Dataset &data, bool static_only, double lambda,
                                   bool against_clean, bool quantize) {
    std::vector<bool> exclude;
    if (static_only) {
        const std::vector<double> var =
            scene.transient_variance.size() == scene.cloud.size() ? scene.transient_variance
                                                                  : compute_transient_variance(scene);
        exclude = classify_transient(var, lambda);
    }
    EvalReport report;
    for (int k = 0; k < int(data.train.size()); ++k) {
        const ImageRecord &rec = data.train_image(k);
        const Image &target = against_clean && rec.clean ? *rec.clean : rec.image;
        Image img = scene.render_image(scene.model.embedding(k), rec.camera, exclude);
        if (quantize) {
            img = quantize_8bit(img);
        }
        report.images.push_back({rec.name, psnr(img, target), ssim(img, target)});
    }
    finish(report);
    return report;
}

double TransientCensus::transient_fraction() const {
    const std::size_t n = static_count + transient_count;
    return n > 0 ? double(transient_count) / double(n) : 0.0;
}

std::string TransientCensus::to_json() const {
    json j;
    j["lambda"] = lambda;
    j["static"] = static_count;
    j["transient"] = transient_count;
    j["transient_fraction"] = transient_fraction();
    j["histogram"] = {{"scale", "log10"}, {"edges", bin_edges}, {"counts", histogram}};
    return j.dump(2);
}

TransientCensus transient_census(std::span<const double> variances, double lambda) {
    TransientCensus census;
    census.lambda = lambda;
    const std::vector<bool> mask = classify_transient(variances, lambda);
    for (bool t : mask) {
        (t ? census.transient_count : census.static_count) += 1;
    }
    census.histogram.assign(kHistogramBins, 0);
    const double width = (kHistogramLogMax - kHistogramLogMin) / kHistogramBins;
    for (int b = 0; b <= kHistogramBins; ++b) {
        census.bin_edges.push_back(kHistogramLogMin + b * width);
    }
    for (double v : variances) {
        int bin = 0;
        if (v > 0.0) {
            bin = int(std::floor((std::log10(v) - kHistogramLogMin) / width));
        }
        census.histogram[std::clamp(bin, 0, kHistogramBins - 1)] += 1;
    }
    return census;
}

} // namespace swag
