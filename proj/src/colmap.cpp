#include "swag/data_io.hpp"
#include "swag/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace swag {

namespace fs = std::filesystem;

namespace {

struct Intrinsics {
    int width = 0;
    int height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
};

std::vector<std::string> read_lines(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw MissingFile("missing " + path.string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(line);
    }
    return lines;
}

bool skippable(const std::string &line) {
    const auto pos = line.find_first_not_of(" \t");
    return pos == std::string::npos || line[pos] == '#';
}

// Parses every token of `line` as T; throws MalformedLine on any failure.
template <typename T>
std::vector<T> parse_numbers(const std::string &line, const fs::path &file, int lineno, std::size_t skip_tail = 0) {
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) {
        tokens.push_back(tok);
    }
    std::vector<T> out;
    for (std::size_t i = 0; i + skip_tail < tokens.size(); ++i) {
        std::istringstream ts(tokens[i]);
        T v{};
        if (!(ts >> v) || !ts.eof()) {
            throw MalformedLine(file.string(), lineno, "bad number '" + tokens[i] + "'");
        }
        out.push_back(v);
    }
    return out;
}

std::map<int, Intrinsics> parse_cameras(const fs::path &file) {
    const auto lines = read_lines(file);
    std::map<int, Intrinsics> cams;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int lineno = int(i) + 1;
        if (skippable(lines[i])) {
            continue;
        }
        std::istringstream ss(lines[i]);
        int id = 0;
        std::string model;
        if (!(ss >> id >> model)) {
            throw MalformedLine(file.string(), lineno, "expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS");
        }
        std::string rest;
        std::getline(ss, rest);
        const auto nums = parse_numbers<double>(rest, file, lineno);
        Intrinsics in;
        std::size_t need = 0;
        if (model == "PINHOLE") {
            need = 6;
        } else if (model == "SIMPLE_PINHOLE") {
            need = 5;
        } else {
            throw UnsupportedCameraModel(file.string() + ":" + std::to_string(lineno) + ": camera model " + model +
                                         " is not supported (use PINHOLE or SIMPLE_PINHOLE)");
        }
        if (nums.size() != need) {
            throw MalformedLine(file.string(), lineno,
                                "expected " + std::to_string(need) + " values after the model, got " +
                                    std::to_string(nums.size()));
        }
        in.width = int(nums[0]);
        in.height = int(nums[1]);
        if (in.width < 1 || in.height < 1 || nums[0] != in.width || nums[1] != in.height) {
            throw MalformedLine(file.string(), lineno, "image size must be a positive integer");
        }
        if (model == "PINHOLE") {
            in.fx = nums[2];
            in.fy = nums[3];
            in.cx = nums[4];
            in.cy = nums[5];
        } else {
            in.fx = in.fy = nums[2];
            in.cx = nums[3];
            in.cy = nums[4];
        }
        if (!(in.fx > 0) || !(in.fy > 0)) {
            throw MalformedLine(file.string(), lineno, "focal length must be positive");
        }
        if (!cams.emplace(id, in).second) {
            throw MalformedLine(file.string(), lineno, "duplicate camera id " + std::to_string(id));
        }
    }
    return cams;
}

struct ImageEntry {
    int id = 0;
    int camera_id = 0;
    Eigen::Vector4d q; // w x y z
    Eigen::Vector3d t;
    std::string name;
};

std::vector<ImageEntry> parse_images(const fs::path &file) {
    const auto lines = read_lines(file);
    std::vector<ImageEntry> entries;
    std::size_t i = 0;
    while (i < lines.size()) {
        if (skippable(lines[i])) {
            ++i;
            continue;
        }
        const int lineno = int(i) + 1;
        std::istringstream ss(lines[i]);
        std::vector<std::string> tok;
        std::string t;
        while (ss >> t) {
            tok.push_back(t);
        }
        if (tok.size() < 10) {
            throw MalformedLine(file.string(), lineno, "expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME");
        }
        std::string header;
        for (std::size_t k = 0; k < 9; ++k) {
            header += tok[k] + " ";
        }
        const auto nums = parse_numbers<double>(header, file, lineno);
        ImageEntry e;
        e.id = int(nums[0]);
        e.q = Eigen::Vector4d(nums[1], nums[2], nums[3], nums[4]);
        e.t = Eigen::Vector3d(nums[5], nums[6], nums[7]);
        e.camera_id = int(nums[8]);
        if (nums[0] != e.id || nums[8] != e.camera_id) {
            throw MalformedLine(file.string(), lineno, "ids must be integers");
        }
        // Names may contain spaces.
        const std::string &line = lines[i];
        std::size_t pos = 0;
        for (int k = 0; k < 9; ++k) {
            pos = line.find_first_not_of(" \t", pos);
            pos = line.find_first_of(" \t", pos);
        }
        pos = line.find_first_not_of(" \t", pos);
        e.name = line.substr(pos);
        while (!e.name.empty() && (e.name.back() == ' ' || e.name.back() == '\t')) {
            e.name.pop_back();
        }
        if (e.q.norm() < 1e-12) {
            throw MalformedLine(file.string(), lineno, "zero quaternion");
        }
        entries.push_back(e);
        // The following line lists 2D observations and may be empty.
        i += 2;
    }
    return entries;
}

void parse_points(const fs::path &file, Dataset &data) {
    const auto lines = read_lines(file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (skippable(lines[i])) {
            continue;
        }
        const int lineno = int(i) + 1;
        const auto nums = parse_numbers<double>(lines[i], file, lineno);
        if (nums.size() < 8) {
            throw MalformedLine(file.string(), lineno, "expected POINT3D_ID X Y Z R G B ERROR TRACK[]");
        }
        data.points.emplace_back(nums[1], nums[2], nums[3]);
        data.point_colors.emplace_back(nums[4] / 255.0, nums[5] / 255.0, nums[6] / 255.0);
    }
}

Camera make_camera(const Intrinsics &in, const ImageEntry &e) {
    Camera cam;
    const Eigen::Quaterniond q(e.q[0], e.q[1], e.q[2], e.q[3]);
    cam.world_to_camera.setIdentity();
    cam.world_to_camera.topLeftCorner<3, 3>() = q.normalized().toRotationMatrix();
    cam.world_to_camera.topRightCorner<3, 1>() = e.t;
    cam.fx = in.fx;
    cam.fy = in.fy;
    cam.cx = in.cx;
    cam.cy = in.cy;
    cam.width = in.width;
    cam.height = in.height;
    return cam;
}

} // namespace

Dataset load_colmap(const fs::path &dir) {
    if (!fs::is_directory(dir)) {
        throw MissingFile("dataset directory " + dir.string() + " does not exist");
    }
    const auto cams = parse_cameras(dir / "cameras.txt");
    auto entries = parse_images(dir / "images.txt");
    Dataset data;
    parse_points(dir / "points3D.txt", data);

    std::sort(entries.begin(), entries.end(), [](const ImageEntry &a, const ImageEntry &b) { return a.name < b.name; });
    for (const auto &e : entries) {
        auto it = cams.find(e.camera_id);
        if (it == cams.end()) {
            throw MissingFile("image " + e.name + " references unknown camera " + std::to_string(e.camera_id));
        }
        ImageRecord rec;
        rec.id = e.id;
        rec.name = e.name;
        rec.camera = make_camera(it->second, e);
        rec.image = read_image(dir / "images" / e.name);
        if (rec.image.width != rec.camera.width || rec.image.height != rec.camera.height) {
            throw DataError("image " + e.name + " does not match its camera size");
        }
        const fs::path clean = dir / "clean" / e.name;
        if (fs::exists(clean)) {
            rec.clean = read_image(clean);
        }
        data.images.push_back(std::move(rec));
    }

    const fs::path split = dir / "split.txt";
    if (fs::exists(split)) {
        std::map<std::string, int> index;
        for (std::size_t i = 0; i < data.images.size(); ++i) {
            index[data.images[i].name] = int(i);
        }
        const auto lines = read_lines(split);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (skippable(lines[i])) {
                continue;
            }
            // The name is the rest of the line and may contain spaces.
            std::istringstream ss(lines[i]);
            std::string kind, name;
            ss >> kind >> std::ws;
            std::getline(ss, name);
            while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) {
                name.pop_back();
            }
            if (name.empty() || (kind != "train" && kind != "test")) {
                throw MalformedLine(split.string(), int(i) + 1, "expected 'train <name>' or 'test <name>'");
            }
            auto it = index.find(name);
            if (it == index.end()) {
                throw MalformedLine(split.string(), int(i) + 1, "unknown image " + name);
            }
            (kind == "train" ? data.train : data.test).push_back(it->second);
        }
        std::sort(data.train.begin(), data.train.end());
        std::sort(data.test.begin(), data.test.end());
    } else {
        for (std::size_t i = 0; i < data.images.size(); ++i) {
            (i % 8 == 0 ? data.test : data.train).push_back(int(i));
        }
    }
    data.aabb = bounding_box(data.points);
    return data;
}

void write_colmap(const fs::path &dir, const Dataset &data) {
    fs::create_directories(dir / "images");
    const bool has_clean = std::any_of(data.images.begin(), data.images.end(), [](const ImageRecord &r) { return r.clean.has_value(); });
    if (has_clean) {
        fs::create_directories(dir / "clean");
    }
    std::ofstream cams(dir / "cameras.txt");
    std::ofstream imgs(dir / "images.txt");
    std::ofstream pts(dir / "points3D.txt");
    std::ofstream split(dir / "split.txt");
    if (!cams || !imgs || !pts || !split) {
        throw IoError("cannot write dataset files in " + dir.string());
    }
    cams << std::setprecision(17) << "# Camera list with one line of data per camera:\n"
         << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    imgs << std::setprecision(17) << "# Image list with two lines of data per image:\n"
         << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
         << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        const ImageRecord &rec = data.images[i];
        const Camera &c = rec.camera;
        const int cam_id = int(i) + 1;
        cams << cam_id << " PINHOLE " << c.width << " " << c.height << " " << c.fx << " " << c.fy << " " << c.cx
             << " " << c.cy << "\n";
        const Eigen::Quaterniond q(Eigen::Matrix3d(c.rotation()));
        const Eigen::Vector3d t = c.translation();
        imgs << rec.id << " " << q.w() << " " << q.x() << " " << q.y() << " " << q.z() << " " << t.x() << " "
             << t.y() << " " << t.z() << " " << cam_id << " " << rec.name << "\n\n";
        write_image(dir / "images" / rec.name, rec.image);
        if (rec.clean) {
            write_image(dir / "clean" / rec.name, *rec.clean);
        }
    }
    pts << std::setprecision(17) << "# 3D point list with one line of data per point:\n"
        << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[]\n";
    for (std::size_t i = 0; i < data.points.size(); ++i) {
        const auto &p = data.points[i];
        const Eigen::Vector3d col =
            i < data.point_colors.size() ? data.point_colors[i] : Eigen::Vector3d::Constant(0.5);
        pts << i + 1 << " " << p.x() << " " << p.y() << " " << p.z() << " " << std::lround(std::clamp(col.x(), 0.0, 1.0) * 255)
            << " " << std::lround(std::clamp(col.y(), 0.0, 1.0) * 255) << " "
            << std::lround(std::clamp(col.z(), 0.0, 1.0) * 255) << " 0\n";
    }
    for (int i : data.train) {
        split << "train " << data.images[i].name << "\n";
    }
    for (int i : data.test) {
        split << "test " << data.images[i].name << "\n";
    }
}

} // namespace swag
