#include "swag/data_io.hpp"
#include "swag/errors.hpp"

#include <algorithm>
#include <stdexcept>

namespace swag {

Aabb bounding_box(const std::vector<Eigen::Vector3d> &points, double margin) {
    Aabb box;
    if (points.empty()) {
        box.min = Eigen::Vector3d::Constant(-1.0);
        box.max = Eigen::Vector3d::Constant(1.0);
        return box;
    }
    box.min = box.max = points.front();
    for (const auto &p : points) {
        box.min = box.min.cwiseMin(p);
        box.max = box.max.cwiseMax(p);
    }
    Eigen::Vector3d pad = (box.max - box.min) * margin;
    const double fallback = std::max(1e-3, (box.max - box.min).maxCoeff() * margin);
    for (int k = 0; k < 3; ++k) {
        if (pad[k] <= 0.0) {
            pad[k] = fallback;
        }
    }
    box.min -= pad;
    box.max += pad;
    return box;
}

Image downscale_image(const Image &img, int factor) {
    if (factor <= 1) {
        return img;
    }
    const int w = std::max(1, img.width / factor);
    const int h = std::max(1, img.height / factor);
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double sum = 0.0;
                int count = 0;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        const int sx = x * factor + dx, sy = y * factor + dy;
                        if (sx < img.width && sy < img.height) {
                            sum += img.at(sx, sy, c);
                            ++count;
                        }
                    }
                }
                out.at(x, y, c) = sum / count;
            }
        }
    }
    return out;
}

Camera downscale_camera(const Camera &cam, int factor) {
    if (factor <= 1) {
        return cam;
    }
    Camera out = cam;
    out.fx /= factor;
    out.fy /= factor;
    out.cx /= factor;
    out.cy /= factor;
    out.width = std::max(1, cam.width / factor);
    out.height = std::max(1, cam.height / factor);
    return out;
}

void downscale_dataset(Dataset &data, int factor) {
    if (factor <= 1) {
        return;
    }
    for (auto &rec : data.images) {
        rec.image = downscale_image(rec.image, factor);
        if (rec.clean) {
            rec.clean = downscale_image(*rec.clean, factor);
        }
        rec.camera = downscale_camera(rec.camera, factor);
    }
}

Perturbation parse_perturbation(const std::string &name) {
    if (name == "none") {
        return Perturbation::None;
    }
    if (name == "color") {
        return Perturbation::Color;
    }
    if (name == "occluder") {
        return Perturbation::Occluder;
    }
    if (name == "both") {
        return Perturbation::Both;
    }
    throw std::invalid_argument("unknown perturbation '" + name + "'");
}

std::string perturbation_name(Perturbation p) {
    switch (p) {
    case Perturbation::None:
        return "none";
    case Perturbation::Color:
        return "color";
    case Perturbation::Occluder:
        return "occluder";
    case Perturbation::Both:
        return "both";
    }
    return "none";
}

Dataset load_dataset(const std::string &source, int downscale) {
    const std::string prefix = "synthetic:";
    Dataset data;
    if (source.rfind(prefix, 0) == 0) {
        std::vector<std::string> parts;
        std::size_t start = prefix.size();
        while (true) {
            const std::size_t colon = source.find(':', start);
            parts.push_back(source.substr(start, colon - start));
            if (colon == std::string::npos) {
                break;
            }
            start = colon + 1;
        }
        if (parts.empty() || parts.size() > 3 || parts[0].empty()) {
            throw std::invalid_argument("expected synthetic:<scene>[:<perturbation>[:<seed>]]");
        }
        SyntheticSpec spec;
        spec.scene = parts[0];
        const Perturbation p = parts.size() > 1 ? parse_perturbation(parts[1]) : Perturbation::None;
        std::uint64_t seed = 0;
        if (parts.size() > 2) {
            try {
                std::size_t used = 0;
                seed = std::stoull(parts[2], &used);
                if (used != parts[2].size()) {
                    throw std::invalid_argument(parts[2]);
                }
            } catch (const std::exception &) {
                throw std::invalid_argument("bad synthetic seed '" + parts[2] + "'");
            }
        }
        data = generate_synthetic(spec, p, seed);
    } else {
        data = load_colmap(source);
    }
    downscale_dataset(data, downscale);
    return data;
}

} // namespace swag
