#include "swag/bundle.hpp"
#include "swag/errors.hpp"
#include "swag/transient.hpp"

#include "binary_io.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstring>
#include <map>

namespace swag {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'W', 'A', 'G', 'B', 'N', 'D', 'L'};

struct ArraySpec {
    std::string name;
    std::string dtype;
    std::vector<std::size_t> shape;
    std::vector<char> bytes;
};

std::vector<char> f32_bytes(const std::vector<double> &v) {
    std::vector<char> out(v.size() * 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const float f = static_cast<float>(v[i]);
        std::memcpy(out.data() + 4 * i, &f, 4);
    }
    return out;
}

std::vector<char> u32_bytes(const std::vector<std::uint32_t> &v) {
    std::vector<char> out(v.size() * 4);
    std::memcpy(out.data(), v.data(), out.size());
    return out;
}

// Row-major [rows, cols] copy of a column-major matrix map.
std::vector<double> row_major(const Eigen::Map<const Eigen::MatrixXd> &m) {
    std::vector<double> out;
    out.reserve(std::size_t(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out.push_back(m(r, c));
        }
    }
    return out;
}

json camera_json(const Camera &c) {
    std::vector<double> w;
    for (int r = 0; r < 4; ++r) {
        for (int col = 0; col < 4; ++col) {
            w.push_back(c.world_to_camera(r, col));
        }
    }
    return {{"world_to_camera", w}, {"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
            {"width", c.width},     {"height", c.height}, {"z_near", c.z_near}};
}

Camera camera_from_json(const json &j) {
    Camera c;
    const auto w = j.at("world_to_camera").get<std::vector<double>>();
    if (w.size() != 16) {
        throw CorruptArray("camera matrix must have 16 entries");
    }
    for (int r = 0; r < 4; ++r) {
        for (int col = 0; col < 4; ++col) {
            c.world_to_camera(r, col) = w[std::size_t(4 * r + col)];
        }
    }
    c.fx = j.at("fx");
    c.fy = j.at("fy");
    c.cx = j.at("cx");
    c.cy = j.at("cy");
    c.width = j.at("width");
    c.height = j.at("height");
    c.z_near = j.at("z_near");
    return c;
}

} // namespace

void export_bundle(const std::filesystem::path &path, const Scene &scene, double lambda) {
    const GaussianCloud &cloud = scene.cloud;
    const std::size_t n = cloud.size();
    const AppearanceModel &model = scene.model;
    const std::vector<double> variance =
        scene.transient_variance.size() == n ? scene.transient_variance : compute_transient_variance(scene);
    const std::vector<bool> mask = classify_transient(variance, lambda);

    // emb(x) is baked from the float32 centers and features the file carries,
    // so importing and re-exporting reproduces it exactly.
    const auto f32 = [](double v) { return double(float(v)); };
    HashGrid grid = model.grid;
    const std::vector<std::uint64_t> keys = model.grid.written_keys();
    for (std::uint64_t key : keys) {
        const HashFeature &f = model.grid.feature(key);
        grid.set_feature(key, {f32(f[0]), f32(f[1])});
    }
    const int enc = grid.output_dim();
    std::vector<double> emb_x(n * std::size_t(enc));
    for (std::size_t g = 0; g < n; ++g) {
        Eigen::Vector3d c;
        for (int k = 0; k < 3; ++k) {
            c[k] = f32(cloud.centers[3 * g + std::size_t(k)]);
        }
        grid.encode(c, model.aabb, emb_x.data() + g * std::size_t(enc));
    }

    std::vector<ArraySpec> arrays;
    auto add_f32 = [&](const std::string &name, std::vector<std::size_t> shape, const std::vector<double> &v) {
        arrays.push_back({name, "f32", std::move(shape), f32_bytes(v)});
    };
    add_f32("centers", {n, 3}, cloud.centers);
    add_f32("log_scales", {n, 3}, cloud.log_scales);
    add_f32("rotations", {n, 4}, cloud.rotations);
    add_f32("opacity_logits", {n}, cloud.opacity_logits);
    add_f32("sh", {n, std::size_t(cloud.coeffs_per_gaussian()), 3}, cloud.sh);
    add_f32("transient_variance", {n}, variance);
    std::vector<double> mask_f(n);
    for (std::size_t g = 0; g < n; ++g) {
        mask_f[g] = mask[g] ? 1.0 : 0.0;
    }
    add_f32("transient_mask", {n}, mask_f);
    add_f32("emb_x", {n, std::size_t(enc)}, emb_x);

    const Mlp &mlp = model.mlp;
    const std::size_t in = std::size_t(mlp.in_dim()), hid = std::size_t(mlp.hidden_dim()),
                      out = std::size_t(mlp.out_dim());
    add_f32("mlp_w1", {hid, in}, row_major(mlp.w1()));
    add_f32("mlp_b1", {hid}, std::vector<double>(mlp.b1().data(), mlp.b1().data() + hid));
    add_f32("mlp_w2", {hid, hid}, row_major(mlp.w2()));
    add_f32("mlp_b2", {hid}, std::vector<double>(mlp.b2().data(), mlp.b2().data() + hid));
    add_f32("mlp_w3", {out, hid}, row_major(mlp.w3()));
    add_f32("mlp_b3", {out}, std::vector<double>(mlp.b3().data(), mlp.b3().data() + out));

    std::vector<std::uint32_t> keys32;
    std::vector<double> features;
    for (std::uint64_t k : keys) {
        keys32.push_back(std::uint32_t(k));
        const HashFeature &f = model.grid.feature(k);
        features.insert(features.end(), f.begin(), f.end());
    }
    arrays.push_back({"hash_keys", "u32", {keys.size()}, u32_bytes(keys32)});
    add_f32("hash_features", {keys.size(), std::size_t(kHashFeatures)}, features);

    const std::size_t images = std::size_t(model.image_count());
    add_f32("embeddings", {images, std::size_t(kEmbeddingDim)}, model.embeddings);
    std::vector<std::uint32_t> ids(images);
    for (std::size_t i = 0; i < images; ++i) {
        ids[i] = std::uint32_t(i);
    }
    arrays.push_back({"image_ids", "u32", {images}, u32_bytes(ids)});

    const HashGridConfig &hc = model.grid.config();
    json manifest;
    manifest["format"] = "swag-scene-bundle";
    manifest["version"] = kBundleVersion;
    manifest["count"] = n;
    manifest["variant"] = variant_name(scene.variant);
    manifest["sh_degree"] = scene.sh_degree;
    manifest["sh_max_degree"] = cloud.sh_degree;
    manifest["background"] = {scene.background.x(), scene.background.y(), scene.background.z()};
    manifest["temperature"] = model.temperature;
    manifest["eval_uniform"] = kEvalUniform;
    manifest["lambda"] = lambda;
    manifest["embedding_dim"] = kEmbeddingDim;
    manifest["aabb"] = {{"min", {model.aabb.min.x(), model.aabb.min.y(), model.aabb.min.z()}},
                        {"max", {model.aabb.max.x(), model.aabb.max.y(), model.aabb.max.z()}}};
    manifest["hash_grid"] = {{"levels", hc.levels},
                             {"features_per_level", kHashFeatures},
                             {"base_resolution", hc.base_resolution},
                             {"max_resolution", hc.max_resolution},
                             {"table_size", hc.table_size},
                             {"seed", hc.seed},
                             {"init_range", hc.init_range},
                             {"storage", "sparse"}};
    manifest["mlp"] = {{"layers", {in, hid, hid, out}},
                       {"hidden_activation", "relu"},
                       {"input_order", {"sh_color", "emb_x", "embedding"}},
                       {"outputs", {"sigmoid_r", "sigmoid_g", "sigmoid_b", "opacity_variation_location"}},
                       {"weight_layout", "row_major_out_in"}};
    json imgs = json::array();
    for (std::size_t i = 0; i < images; ++i) {
        imgs.push_back({{"id", i},
                        {"name", i < scene.image_names.size() ? scene.image_names[i] : ""},
                        {"camera", i < scene.cameras.size() ? camera_json(scene.cameras[i]) : json()}});
    }
    manifest["images"] = imgs;
    json specs = json::array();
    std::size_t offset = 0;
    for (const auto &a : arrays) {
        specs.push_back({{"name", a.name},
                         {"dtype", a.dtype},
                         {"shape", a.shape},
                         {"offset", offset},
                         {"bytes", a.bytes.size()}});
        offset += a.bytes.size();
    }
    manifest["arrays"] = specs;

    const std::string text = manifest.dump(1);
    detail::BinaryWriter w(path.string());
    w.bytes(kMagic, sizeof(kMagic));
    w.pod(kBundleVersion);
    w.pod(std::uint32_t(text.size()));
    w.bytes(text.data(), text.size());
    for (const auto &a : arrays) {
        w.array(a.bytes);
    }
    w.finish();
}

BundleContents import_bundle(const std::filesystem::path &path) {
    detail::BinaryReader r(path.string());
    const std::string where = path.string() + ": ";
    char magic[8];
    r.bytes(magic, sizeof(magic), "header");
    if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw CorruptArray(where + "not a scene bundle");
    }
    const auto version = r.pod<std::uint32_t>("version");
    if (version != kBundleVersion) {
        throw VersionMismatch(where + "bundle version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kBundleVersion) + ")");
    }
    const auto len = r.pod<std::uint32_t>("manifest length");
    BundleContents out;
    out.manifest = r.string(len, "manifest");
    const std::size_t data_size = r.remaining();
    std::vector<char> data = r.array<char>(data_size, "data");

    try {
        const json m = json::parse(out.manifest);
        if (m.at("version").get<std::uint32_t>() != version) {
            throw CorruptArray(where + "manifest version disagrees with the header");
        }
        std::map<std::string, std::pair<json, std::size_t>> specs;
        std::size_t expected = 0;
        for (const auto &a : m.at("arrays")) {
            const std::string name = a.at("name");
            const std::string dtype = a.at("dtype");
            if (dtype != "f32" && dtype != "u32") {
                throw CorruptArray(where + "array " + name + " has unknown dtype " + dtype);
            }
            std::size_t count = 1;
            for (std::size_t d : a.at("shape").get<std::vector<std::size_t>>()) {
                count *= d;
            }
            const std::size_t offset = a.at("offset"), bytes = a.at("bytes");
            if (bytes != 4 * count) {
                throw CorruptArray(where + "array " + name + " byte length does not match its shape");
            }
            if (offset > data_size || bytes > data_size - offset) {
                throw CorruptArray(where + "array " + name + " extends past the end of the file");
            }
            expected = std::max(expected, offset + bytes);
            specs[name] = {a, count};
        }
        if (expected != data_size) {
            throw CorruptArray(where + "data section size does not match the manifest");
        }
        auto f32 = [&](const std::string &name, std::size_t want) {
            auto it = specs.find(name);
            if (it == specs.end() || it->second.first.at("dtype") != "f32") {
                throw CorruptArray(where + "missing f32 array " + name);
            }
            if (it->second.second != want) {
                throw CorruptArray(where + "array " + name + " has " + std::to_string(it->second.second) +
                                   " values, expected " + std::to_string(want));
            }
            const std::size_t offset = it->second.first.at("offset");
            std::vector<double> v(want);
            for (std::size_t i = 0; i < want; ++i) {
                float f;
                std::memcpy(&f, data.data() + offset + 4 * i, 4);
                v[i] = f;
            }
            return v;
        };
        auto u32 = [&](const std::string &name, std::size_t want) {
            auto it = specs.find(name);
            if (it == specs.end() || it->second.first.at("dtype") != "u32" || it->second.second != want) {
                throw CorruptArray(where + "missing or mis-sized u32 array " + name);
            }
            const std::size_t offset = it->second.first.at("offset");
            std::vector<std::uint32_t> v(want);
            std::memcpy(v.data(), data.data() + offset, 4 * want);
            return v;
        };
        auto count_of = [&](const std::string &name) {
            auto it = specs.find(name);
            if (it == specs.end()) {
                throw CorruptArray(where + "missing array " + name);
            }
            return it->second.second;
        };

        Scene &sc = out.scene;
        const std::size_t n = m.at("count");
        sc.variant = parse_variant(m.at("variant"));
        sc.sh_degree = m.at("sh_degree");
        const int max_degree = m.at("sh_max_degree");
        if (max_degree < 0 || max_degree > kMaxShDegree || sc.sh_degree < 0 || sc.sh_degree > max_degree) {
            throw CorruptArray(where + "bad SH degree");
        }
        const auto bg = m.at("background").get<std::vector<double>>();
        sc.background = Eigen::Vector3d(bg.at(0), bg.at(1), bg.at(2));
        out.lambda = m.at("lambda");

        GaussianCloud &c = sc.cloud;
        c.sh_degree = max_degree;
        c.centers = f32("centers", 3 * n);
        c.log_scales = f32("log_scales", 3 * n);
        c.rotations = f32("rotations", 4 * n);
        c.opacity_logits = f32("opacity_logits", n);
        c.sh = f32("sh", n * c.sh_stride());
        sc.transient_variance = f32("transient_variance", n);
        const auto mask = f32("transient_mask", n);
        out.transient_mask.resize(n);
        for (std::size_t g = 0; g < n; ++g) {
            out.transient_mask[g] = mask[g] != 0.0;
        }

        const json &h = m.at("hash_grid");
        HashGridConfig hc;
        hc.levels = h.at("levels");
        hc.base_resolution = h.at("base_resolution");
        hc.max_resolution = h.at("max_resolution");
        hc.table_size = h.at("table_size");
        hc.seed = h.at("seed");
        hc.init_range = h.at("init_range");
        AppearanceModel &model = sc.model;
        model.grid = HashGrid(hc);
        model.temperature = m.at("temperature");
        const auto lo = m.at("aabb").at("min").get<std::vector<double>>();
        const auto hi = m.at("aabb").at("max").get<std::vector<double>>();
        model.aabb.min = Eigen::Vector3d(lo.at(0), lo.at(1), lo.at(2));
        model.aabb.max = Eigen::Vector3d(hi.at(0), hi.at(1), hi.at(2));
        out.emb_x = f32("emb_x", n * std::size_t(model.grid.output_dim()));

        const auto layers = m.at("mlp").at("layers").get<std::vector<int>>();
        if (layers.size() != 4 || layers[1] != layers[2]) {
            throw CorruptArray(where + "unsupported MLP layout");
        }
        model.mlp = Mlp(layers[0], layers[1], layers[3]);
        const std::size_t in = std::size_t(layers[0]), hid = std::size_t(layers[1]), outd = std::size_t(layers[3]);
        std::vector<double> &p = model.mlp.params();
        std::size_t o = 0;
        auto put_matrix = [&](const std::vector<double> &rm, std::size_t rows, std::size_t cols) {
            // Stored row-major, held column-major.
            for (std::size_t rr = 0; rr < rows; ++rr) {
                for (std::size_t cc = 0; cc < cols; ++cc) {
                    p[o + cc * rows + rr] = rm[rr * cols + cc];
                }
            }
            o += rows * cols;
        };
        auto put_vector = [&](const std::vector<double> &v) {
            std::copy(v.begin(), v.end(), p.begin() + std::ptrdiff_t(o));
            o += v.size();
        };
        put_matrix(f32("mlp_w1", hid * in), hid, in);
        put_vector(f32("mlp_b1", hid));
        put_matrix(f32("mlp_w2", hid * hid), hid, hid);
        put_vector(f32("mlp_b2", hid));
        put_matrix(f32("mlp_w3", outd * hid), outd, hid);
        put_vector(f32("mlp_b3", outd));

        const std::size_t entries = count_of("hash_keys");
        const auto keys = u32("hash_keys", entries);
        const auto feats = f32("hash_features", entries * kHashFeatures);
        for (std::size_t i = 0; i < entries; ++i) {
            if (keys[i] >= model.grid.total_entries()) {
                throw CorruptArray(where + "hash key out of range");
            }
            model.grid.set_feature(keys[i], {feats[2 * i], feats[2 * i + 1]});
        }

        const std::size_t images = m.at("images").size();
        model.embeddings = f32("embeddings", images * kEmbeddingDim);
        u32("image_ids", images);
        for (const auto &img : m.at("images")) {
            sc.image_names.push_back(img.at("name"));
            if (!img.at("camera").is_null()) {
                sc.cameras.push_back(camera_from_json(img.at("camera")));
            }
        }
    } catch (const json::exception &e) {
        throw CorruptArray(where + "bad manifest: " + e.what());
    } catch (const std::invalid_argument &e) {
        throw CorruptArray(where + e.what());
    }
    return out;
}

} // namespace swag
