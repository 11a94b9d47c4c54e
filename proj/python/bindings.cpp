#include "swag/bundle.hpp"
#include "swag/errors.hpp"
#include "swag/evaluation.hpp"
#include "swag/metrics.hpp"
#include "swag/parallel.hpp"
#include "swag/trainer.hpp"
#include "swag/transient.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

namespace py = pybind11;
using namespace swag;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Image &img) {
    Array out({img.height, img.width, 3});
    std::memcpy(out.mutable_data(), img.data.data(), img.data.size() * sizeof(double));
    return out;
}

Image from_numpy(const Array &a) {
    if (a.ndim() != 3 || a.shape(2) != 3) {
        throw DimensionMismatch("expected an array of shape (height, width, 3)");
    }
    Image img(int(a.shape(1)), int(a.shape(0)));
    std::memcpy(img.data.data(), a.data(), img.data.size() * sizeof(double));
    return img;
}

py::dict report_dict(const EvalReport &r) {
    py::list images;
    for (const ImageMetrics &m : r.images) {
        images.append(py::dict(py::arg("name") = m.name, py::arg("psnr") = m.psnr, py::arg("ssim") = m.ssim));
    }
    return py::dict(py::arg("images") = images, py::arg("mean_psnr") = r.mean_psnr, py::arg("mean_ssim") = r.mean_ssim);
}

const std::vector<double> &variances(Scene &scene) {
    if (scene.transient_variance.size() != scene.cloud.size()) {
        scene.transient_variance = compute_transient_variance(scene);
    }
    return scene.transient_variance;
}

Array render_scene(Scene &scene, const py::object &embedding, const Camera &cam, bool static_only, double lambda) {
    std::vector<double> emb;
    if (py::isinstance<py::int_>(embedding)) {
        const auto e = scene.model.embedding(embedding.cast<int>());
        emb.assign(e.begin(), e.end());
    } else if (py::isinstance<py::str>(embedding)) {
        const auto e = scene.model.embedding(scene.find_image(embedding.cast<std::string>()));
        emb.assign(e.begin(), e.end());
    } else {
        emb = embedding.cast<std::vector<double>>();
    }
    std::vector<bool> exclude;
    if (static_only) {
        exclude = classify_transient(variances(scene), lambda);
    }
    Image img;
    {
        py::gil_scoped_release release;
        img = scene.render_image(emb, cam, exclude);
    }
    return to_numpy(img);
}

} // namespace

PYBIND11_MODULE(_swag, m) {
    m.doc() = "Gaussian splatting with per-image appearance and transient modelling.";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", error.ptr());
    py::register_exception<NumericError>(m, "NumericError", error.ptr());
    py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);

    m.def("set_thread_count", &set_thread_count, py::arg("n"));
    m.def("thread_count", &thread_count);

    py::class_<Camera>(m, "Camera")
        .def(py::init<>())
        .def_readwrite("world_to_camera", &Camera::world_to_camera)
        .def_readwrite("fx", &Camera::fx)
        .def_readwrite("fy", &Camera::fy)
        .def_readwrite("cx", &Camera::cx)
        .def_readwrite("cy", &Camera::cy)
        .def_readwrite("width", &Camera::width)
        .def_readwrite("height", &Camera::height)
        .def_readwrite("z_near", &Camera::z_near)
        .def_property_readonly("center", &Camera::center)
        .def("validate", &Camera::validate)
        .def_static("look_at", &Camera::look_at, py::arg("eye"), py::arg("target"), py::arg("up"), py::arg("focal"),
                    py::arg("width"), py::arg("height"));

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("train", &Dataset::train)
        .def_readonly("test", &Dataset::test)
        .def_property_readonly("size", [](const Dataset &d) { return d.images.size(); })
        .def_property_readonly("points", [](const Dataset &d) {
            Eigen::MatrixX3d p(Eigen::Index(d.points.size()), 3);
            for (std::size_t i = 0; i < d.points.size(); ++i) {
                p.row(Eigen::Index(i)) = d.points[i].transpose();
            }
            return p;
        })
        .def("name", [](const Dataset &d, int i) { return d.images.at(std::size_t(i)).name; })
        .def("camera", [](const Dataset &d, int i) { return d.images.at(std::size_t(i)).camera; })
        .def("image", [](const Dataset &d, int i) { return to_numpy(d.images.at(std::size_t(i)).image); })
        .def("clean", [](const Dataset &d, int i) -> py::object {
            const auto &c = d.images.at(std::size_t(i)).clean;
            return c ? py::object(to_numpy(*c)) : py::none();
        })
        .def("save", [](const Dataset &d, const std::filesystem::path &dir) { write_colmap(dir, d); });

    m.def("load_dataset", &load_dataset, py::arg("source"), py::arg("downscale") = 1);
    m.def(
        "synthetic",
        [](const std::string &scene, const std::string &perturbation, std::uint64_t seed, int cameras, int size) {
            SyntheticSpec spec;
            spec.scene = scene;
            spec.cameras = cameras;
            spec.width = size;
            spec.height = size;
            return generate_synthetic(spec, parse_perturbation(perturbation), seed);
        },
        py::arg("scene") = "blobs", py::arg("perturbation") = "none", py::arg("seed") = 0, py::arg("cameras") = 20,
        py::arg("size") = 64);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_static("desk", &TrainConfig::desk, py::arg("iterations") = 3000)
        .def_static("full", &TrainConfig::full)
        .def_static("from_json", py::overload_cast<const std::string &>(&TrainConfig::from_json))
        .def("to_json", &TrainConfig::to_json)
        .def("validate", &TrainConfig::validate)
        .def_property(
            "variant", [](const TrainConfig &c) { return variant_name(c.variant); },
            [](TrainConfig &c, const std::string &v) { c.variant = parse_variant(v); })
        .def_readwrite("iterations", &TrainConfig::iterations)
        .def_readwrite("densify_start", &TrainConfig::densify_start)
        .def_readwrite("densify_interval", &TrainConfig::densify_interval)
        .def_readwrite("densify_end", &TrainConfig::densify_end)
        .def_readwrite("sh_degree", &TrainConfig::sh_degree)
        .def_readwrite("max_gaussians", &TrainConfig::max_gaussians)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("temperature", &TrainConfig::temperature)
        .def_readwrite("ssim_weight", &TrainConfig::ssim_weight)
        .def_readwrite("fit_iterations", &TrainConfig::fit_iterations);

    py::class_<Scene>(m, "Scene")
        .def_property_readonly("gaussian_count", [](const Scene &s) { return s.cloud.size(); })
        .def_property_readonly("variant", [](const Scene &s) { return variant_name(s.variant); })
        .def_readonly("sh_degree", &Scene::sh_degree)
        .def_readonly("image_names", &Scene::image_names)
        .def_readonly("cameras", &Scene::cameras)
        .def_property_readonly("centers",
                               [](const Scene &s) {
                                   return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
                                       s.cloud.centers.data(), Eigen::Index(s.cloud.size()), 3);
                               })
        .def("embedding",
             [](const Scene &s, int i) {
                 const auto e = s.model.embedding(i);
                 return std::vector<double>(e.begin(), e.end());
             })
        .def("transient_variance", [](Scene &s) { return variances(s); })
        .def("render", &render_scene, py::arg("embedding"), py::arg("camera"), py::arg("static_only") = false,
             py::arg("lambda_") = 0.0)
        .def(
            "census",
            [](Scene &s, double lambda) {
                const TransientCensus c = transient_census(variances(s), lambda);
                return py::dict(py::arg("static") = c.static_count, py::arg("transient") = c.transient_count,
                                py::arg("fraction") = c.transient_fraction(), py::arg("histogram") = c.histogram,
                                py::arg("bin_edges") = c.bin_edges);
            },
            py::arg("lambda_") = 0.0);

    py::class_<TrainState>(m, "TrainState")
        .def_readonly("config", &TrainState::config)
        .def_readonly("iteration", &TrainState::iteration)
        .def_property_readonly("scene", [](TrainState &s) -> Scene & { return s.scene; },
                               py::return_value_policy::reference_internal)
        .def("save", [](const TrainState &s, const std::filesystem::path &p) { save_checkpoint(p, s); });

    m.def(
        "train",
        [](const TrainConfig &config, const Dataset &data, const std::function<void(py::dict)> &callback) {
            StepCallback cb;
            if (callback) {
                cb = [&](const StepStats &st) {
                    py::gil_scoped_acquire acquire;
                    callback(py::dict(py::arg("iteration") = st.iteration, py::arg("loss") = st.loss,
                                      py::arg("psnr") = st.psnr, py::arg("gaussians") = st.gaussians));
                };
            }
            py::gil_scoped_release release;
            TrainState state = train(config, data, cb);
            state.scene.transient_variance = compute_transient_variance(state.scene);
            return state;
        },
        py::arg("config"), py::arg("data"), py::arg("callback") = nullptr);
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    m.def(
        "evaluate",
        [](const Scene &s, const Dataset &d, int fit_iterations) {
            EvalOptions o;
            o.fit_iterations = fit_iterations;
            return report_dict(evaluate_test_set(s, d, o));
        },
        py::arg("scene"), py::arg("data"), py::arg("fit_iterations") = 200);
    m.def(
        "evaluate_training_views",
        [](const Scene &s, const Dataset &d, bool static_only, double lambda, bool against_clean) {
            return report_dict(evaluate_training_views(s, d, static_only, lambda, against_clean));
        },
        py::arg("scene"), py::arg("data"), py::arg("static_only") = false, py::arg("lambda_") = 0.0,
        py::arg("against_clean") = false);

    m.def("export_bundle", &export_bundle, py::arg("path"), py::arg("scene"), py::arg("lambda_") = 0.0);
    m.def(
        "import_bundle",
        [](const std::filesystem::path &p) {
            BundleContents b = import_bundle(p);
            const auto n = Eigen::Index(b.scene.cloud.size());
            Eigen::MatrixXd emb = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                b.emb_x.data(), n, n > 0 ? Eigen::Index(b.emb_x.size()) / n : 0);
            return py::dict(py::arg("scene") = std::move(b.scene), py::arg("lambda_") = b.lambda,
                            py::arg("transient_mask") = b.transient_mask, py::arg("emb_x") = emb);
        },
        py::arg("path"));

    m.def("psnr", [](const Array &a, const Array &b) { return psnr(from_numpy(a), from_numpy(b)); });
    m.def("ssim", [](const Array &a, const Array &b) { return ssim(from_numpy(a), from_numpy(b)); });
    m.def("sample_concrete", &sample_concrete, py::arg("delta_alpha"), py::arg("temperature"), py::arg("u"));
    m.def("concrete_cdf", &concrete_cdf, py::arg("tau"), py::arg("delta_alpha"), py::arg("temperature"));
}
