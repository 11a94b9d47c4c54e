#include "swag/data_io.hpp"
#include "swag/random.hpp"
#include "swag/rasterizer.hpp"
#include "swag/scene_model.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace swag {

namespace {

struct GroundTruth {
    std::vector<Eigen::Vector3d> centers;
    std::vector<Eigen::Matrix3d> covariances;
    std::vector<Eigen::Vector3d> colors;
    std::vector<double> opacities;
    std::vector<Eigen::Vector3d> scales; // per-axis standard deviations
    std::vector<Eigen::Matrix3d> rotations;

    void add(const Eigen::Vector3d &c, const Eigen::Vector3d &s, const Eigen::Matrix3d &r, const Eigen::Vector3d &col,
             double opacity) {
        centers.push_back(c);
        scales.push_back(s);
        rotations.push_back(r);
        covariances.push_back(r * s.cwiseAbs2().asDiagonal() * r.transpose());
        colors.push_back(col);
        opacities.push_back(opacity);
    }
};

Eigen::Matrix3d random_rotation(CounterRng &rng) {
    Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    return quaternion_to_rotation(q);
}

// Rotation whose third column is `n`.
Eigen::Matrix3d frame_from_normal(const Eigen::Vector3d &n) {
    const Eigen::Vector3d helper = std::abs(n.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
    const Eigen::Vector3d t1 = helper.cross(n).normalized();
    const Eigen::Vector3d t2 = n.cross(t1);
    Eigen::Matrix3d r;
    r << t1, t2, n;
    return r;
}

void add_blobs(GroundTruth &gt, CounterRng &rng) {
    for (int i = 0; i < 48; ++i) {
        const Eigen::Vector3d c(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9));
        const Eigen::Vector3d s(rng.uniform(0.07, 0.2), rng.uniform(0.07, 0.2), rng.uniform(0.07, 0.2));
        const Eigen::Vector3d col(rng.uniform(0.1, 0.95), rng.uniform(0.1, 0.95), rng.uniform(0.1, 0.95));
        gt.add(c, s, random_rotation(rng), col, 0.9);
    }
}

void add_cubes(GroundTruth &gt, CounterRng &rng) {
    // 3x3x3 grid of small cubes, each face textured by a few flat Gaussians.
    for (int ix = -1; ix <= 1; ++ix) {
        for (int iy = -1; iy <= 1; ++iy) {
            for (int iz = -1; iz <= 1; ++iz) {
                const Eigen::Vector3d base(0.6 * ix, 0.6 * iy, 0.6 * iz);
                const Eigen::Vector3d tint(rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9));
                for (int axis = 0; axis < 3; ++axis) {
                    for (int sign = -1; sign <= 1; sign += 2) {
                        Eigen::Vector3d n = Eigen::Vector3d::Zero();
                        n[axis] = sign;
                        const double shade = 0.75 + 0.25 * (axis / 2.0);
                        gt.add(base + 0.12 * n, Eigen::Vector3d(0.09, 0.09, 0.015), frame_from_normal(n),
                               (tint * shade).cwiseMin(1.0), 0.95);
                    }
                }
            }
        }
    }
}

void add_backdrop(GroundTruth &gt) {
    // Fibonacci lattice on a sphere around the object, flat splats facing inwards.
    constexpr int count = 640;
    constexpr double radius = 4.5;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(1.0 - z * z);
        const double phi = golden * i;
        const Eigen::Vector3d dir(r * std::cos(phi), r * std::sin(phi), z);
        const Eigen::Vector3d col(0.45 + 0.3 * std::sin(2.0 * dir.x() + 1.0), 0.45 + 0.3 * std::sin(2.5 * dir.y()),
                                  0.45 + 0.3 * std::cos(1.5 * dir.z() + 0.5));
        gt.add(radius * dir, Eigen::Vector3d(0.4, 0.4, 0.06), frame_from_normal(dir), col, 0.95);
    }
}

Image render_ground_truth(const GroundTruth &gt, const Camera &cam) {
    std::vector<Splat2D> splats;
    std::vector<Eigen::Vector3d> colors;
    std::vector<double> opacities;
    for (std::size_t g = 0; g < gt.centers.size(); ++g) {
        if (auto s = project_gaussian(gt.centers[g], gt.covariances[g], cam, std::uint32_t(g))) {
            splats.push_back(*s);
            colors.push_back(gt.colors[g]);
            opacities.push_back(gt.opacities[g]);
        }
    }
    return rasterize_reference(splats, colors, opacities, cam).color;
}

void apply_color(Image &img, CounterRng &rng) {
    Eigen::Vector3d a, b;
    for (int c = 0; c < 3; ++c) {
        a[c] = rng.uniform(0.6, 1.4);
    }
    for (int c = 0; c < 3; ++c) {
        b[c] = rng.uniform(-0.2, 0.2);
    }
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        for (int c = 0; c < 3; ++c) {
            double &v = img.data[p * 3 + c];
            v = std::clamp(a[c] * v + b[c], 0.0, 1.0);
        }
    }
}

void apply_occluders(Image &img, CounterRng &rng) {
    const int w = img.width, h = img.height;
    const double total = double(w) * h;
    const int rects = 1 + int(rng.below(3));
    for (int k = 0; k < rects; ++k) {
        const double area = rng.uniform(0.05, 0.20) * total;
        const double aspect = rng.uniform(0.5, 2.0);
        int rw = std::clamp(int(std::lround(std::sqrt(area * aspect))), 1, w);
        int rh = std::clamp(int(std::lround(area / rw)), 1, h);
        while (rw * rh < 0.05 * total) {
            if (rh < h) {
                ++rh;
            } else {
                ++rw;
            }
        }
        while (rw * rh > 0.20 * total) {
            if (rh > 1) {
                --rh;
            } else {
                --rw;
            }
        }
        const int x0 = int(rng.below(std::uint64_t(w - rw + 1)));
        const int y0 = int(rng.below(std::uint64_t(h - rh + 1)));
        const Eigen::Vector3d col(rng.uniform(), rng.uniform(), rng.uniform());
        for (int y = y0; y < y0 + rh; ++y) {
            for (int x = x0; x < x0 + rw; ++x) {
                img.set_pixel(x, y, col);
            }
        }
    }
}

} // namespace

Dataset generate_synthetic(const SyntheticSpec &spec, Perturbation perturbation, std::uint64_t seed) {
    if (spec.cameras < 1 || spec.width < 1 || spec.height < 1 || spec.test_every < 1) {
        throw std::invalid_argument("invalid synthetic scene specification");
    }
    GroundTruth gt;
    CounterRng scene_rng(hash_key(seed, 0x5CE4Eull));
    if (spec.scene == "blobs") {
        add_blobs(gt, scene_rng);
    } else if (spec.scene == "cubes") {
        add_cubes(gt, scene_rng);
    } else {
        throw std::invalid_argument("unknown synthetic scene '" + spec.scene + "'");
    }
    add_backdrop(gt);

    Dataset data;
    const double focal = 1.06 * spec.width;
    for (int i = 0; i < spec.cameras; ++i) {
        const double theta = 2.0 * M_PI * i / spec.cameras;
        const Eigen::Vector3d eye(3.0 * std::cos(theta), 3.0 * std::sin(theta), 0.5 + 0.4 * std::sin(3.0 * theta));
        ImageRecord rec;
        rec.id = i + 1;
        char name[32];
        std::snprintf(name, sizeof(name), "img_%03d.png", i);
        rec.name = name;
        rec.camera = Camera::look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), focal, spec.width,
                                     spec.height);
        // Stored at 8 bits so datasets survive a write/read round trip unchanged.
        rec.clean = quantize_8bit(render_ground_truth(gt, rec.camera));
        rec.image = *rec.clean;
        const bool is_test = i % spec.test_every == 0;
        (is_test ? data.test : data.train).push_back(i);
        if (!is_test) {
            CounterRng rng(hash_key(seed, 0x9E27ull, std::uint64_t(i)));
            if (perturbation == Perturbation::Color || perturbation == Perturbation::Both) {
                apply_color(rec.image, rng);
            }
            if (perturbation == Perturbation::Occluder || perturbation == Perturbation::Both) {
                apply_occluders(rec.image, rng);
            }
            rec.image = quantize_8bit(rec.image);
        }
        data.images.push_back(std::move(rec));
    }

    CounterRng point_rng(hash_key(seed, 0x9017ull));
    for (std::size_t g = 0; g < gt.centers.size(); ++g) {
        const Eigen::Vector3d local(point_rng.normal(), point_rng.normal(), point_rng.normal());
        data.points.push_back(gt.centers[g] + gt.rotations[g] * gt.scales[g].cwiseProduct(local));
        Eigen::Vector3d col = gt.colors[g];
        for (int c = 0; c < 3; ++c) {
            col[c] = std::clamp(col[c] + 0.05 * point_rng.normal(), 0.0, 1.0);
        }
        data.point_colors.push_back(col);
    }
    data.aabb = bounding_box(data.points);
    return data;
}

} // namespace swag
