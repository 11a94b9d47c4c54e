#include "swag/data_io.hpp"
#include "swag/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace swag {

namespace {

std::string lower_extension(const std::filesystem::path &path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return ext;
}

Image from_bytes(int w, int h, const std::vector<unsigned char> &bytes) {
    Image img(w, h);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = bytes[i] / 255.0;
    }
    return img;
}

std::vector<unsigned char> to_bytes(const Image &img) {
    std::vector<unsigned char> bytes(img.data.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
    }
    return bytes;
}

Image read_png(const std::filesystem::path &path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        throw IoError(path.string() + ": " + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> bytes(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError(path.string() + ": " + msg);
    }
    return from_bytes(int(png.width), int(png.height), bytes);
}

void write_png(const std::filesystem::path &path, const Image &img) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = png_uint_32(img.width);
    png.height = png_uint_32(img.height);
    png.format = PNG_FORMAT_RGB;
    const std::vector<unsigned char> bytes = to_bytes(img);
    if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
        throw IoError(path.string() + ": " + png.message);
    }
}

// Next whitespace-separated header token, skipping # comments.
std::string ppm_token(std::istream &in) {
    std::string tok;
    while (in) {
        const int c = in.get();
        if (c == '#') {
            std::string rest;
            std::getline(in, rest);
            continue;
        }
        if (c == EOF) {
            break;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) {
                break;
            }
            continue;
        }
        tok.push_back(char(c));
    }
    return tok;
}

Image read_ppm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const std::string magic = ppm_token(in);
    if (magic != "P6" && magic != "P3") {
        throw IoError(path.string() + ": not a PPM file");
    }
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(ppm_token(in));
        h = std::stoi(ppm_token(in));
        maxval = std::stoi(ppm_token(in));
    } catch (const std::exception &) {
        throw IoError(path.string() + ": malformed PPM header");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
        throw IoError(path.string() + ": unsupported PPM dimensions or depth");
    }
    std::vector<unsigned char> bytes(std::size_t(w) * h * 3);
    if (magic == "P6") {
        in.read(reinterpret_cast<char *>(bytes.data()), std::streamsize(bytes.size()));
        if (in.gcount() != std::streamsize(bytes.size())) {
            throw IoError(path.string() + ": truncated PPM data");
        }
    } else {
        for (auto &b : bytes) {
            int v = -1;
            if (!(in >> v) || v < 0 || v > maxval) {
                throw IoError(path.string() + ": malformed PPM data");
            }
            b = static_cast<unsigned char>(v);
        }
    }
    Image img = from_bytes(w, h, bytes);
    if (maxval != 255) {
        for (double &v : img.data) {
            v = v * 255.0 / maxval;
        }
    }
    return img;
}

void write_ppm(const std::filesystem::path &path, const Image &img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    const std::vector<unsigned char> bytes = to_bytes(img);
    out.write(reinterpret_cast<const char *>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

} // namespace

Image read_image(const std::filesystem::path &path) {
    if (!std::filesystem::exists(path)) {
        throw MissingFile("missing image " + path.string());
    }
    const std::string ext = lower_extension(path);
    if (ext == ".png") {
        return read_png(path);
    }
    if (ext == ".ppm") {
        return read_ppm(path);
    }
    throw IoError(path.string() + ": unsupported image format (expected .png or .ppm)");
}

void write_image(const std::filesystem::path &path, const Image &img) {
    const std::string ext = lower_extension(path);
    if (ext == ".ppm") {
        write_ppm(path, img);
    } else {
        write_png(path, img);
    }
}

} // namespace swag
