#pragma once

#include "swag/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace swag::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class BinaryWriter {
  public:
    explicit BinaryWriter(const std::string &path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) {
            throw IoError("cannot write " + path);
        }
    }

    void bytes(const void *data, std::size_t n) {
        out_.write(static_cast<const char *>(data), std::streamsize(n));
        if (!out_) {
            throw IoError("failed writing " + path_);
        }
    }
    template <typename T> void pod(const T &v) { bytes(&v, sizeof(T)); }
    template <typename T> void array(const std::vector<T> &v) { bytes(v.data(), v.size() * sizeof(T)); }
    void finish() {
        out_.flush();
        if (!out_) {
            throw IoError("failed writing " + path_);
        }
    }

  private:
    std::string path_;
    std::ofstream out_;
};

class BinaryReader {
  public:
    explicit BinaryReader(const std::string &path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw MissingFile("cannot open " + path);
        }
        data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    std::size_t remaining() const { return data_.size() - pos_; }

    void bytes(void *dst, std::size_t n, const std::string &what) {
        if (n > remaining()) {
            throw CorruptArray(path_ + ": truncated while reading " + what);
        }
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
    }
    template <typename T> T pod(const std::string &what) {
        T v{};
        bytes(&v, sizeof(T), what);
        return v;
    }
    template <typename T> std::vector<T> array(std::size_t count, const std::string &what) {
        if (count > remaining() / sizeof(T)) {
            throw CorruptArray(path_ + ": truncated while reading " + what);
        }
        std::vector<T> v(count);
        bytes(v.data(), count * sizeof(T), what);
        return v;
    }
    std::string string(std::size_t n, const std::string &what) {
        std::string s(n, '\0');
        bytes(s.data(), n, what);
        return s;
    }
    const std::string &path() const { return path_; }

  private:
    std::string path_;
    std::vector<char> data_;
    std::size_t pos_ = 0;
};

} // namespace swag::detail
