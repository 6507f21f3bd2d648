#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "fasttcm/errors.hpp"
#include "fasttcm/tensor.hpp"

namespace ftcm {

// Binary PPM (P6) / PGM (P5) with maxval 255. Zero-dependency image formats;
// header parse errors report the byte offset.

namespace detail {

inline int pbm_token(std::istream& is, const std::string& path) {
    // skip whitespace and '#' comments
    int c = is.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (c != EOF && c != '\n') c = is.get();
        c = is.get();
    }
    if (c == EOF || !std::isdigit(c))
        throw IoError("corrupt netpbm header in " + path + " at byte " +
                      std::to_string(static_cast<long>(is.tellg())));
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = is.get();
    }
    return v;
}

inline unsigned char quantize(double v) {
    const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<unsigned char>(q);
}

} // namespace detail

// image [H, W, 3] with values in [0, 1]
inline void write_ppm(const std::filesystem::path& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(2) != 3)
        throw ShapeError("write_ppm: expected [H, W, 3], got " + shape_str(image.shape()));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    const size_t h = image.dim(0), w = image.dim(1);
    os << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(w * 3);
    for (size_t y = 0; y < h; ++y) {
        for (size_t x = 0; x < w * 3; ++x)
            row[x] = detail::quantize(image.at(y * w * 3 + x));
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size()));
    }
    if (!os) throw IoError("write failed: " + path.string());
}

inline Tensor read_ppm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    char m0 = static_cast<char>(is.get()), m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '6')
        throw IoError("corrupt netpbm header in " + path.string() + " at byte 0: not P6");
    const size_t w = detail::pbm_token(is, path.string());
    const size_t h = detail::pbm_token(is, path.string());
    const int maxval = detail::pbm_token(is, path.string());
    if (maxval != 255)
        throw IoError("unsupported maxval " + std::to_string(maxval) + " in " +
                      path.string());
    Tensor image(Shape{h, w, 3});
    std::vector<unsigned char> buf(w * h * 3);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(is.gcount()) != buf.size())
        throw IoError("truncated pixel data in " + path.string() + " at byte " +
                      std::to_string(static_cast<long>(is.tellg())));
    for (size_t i = 0; i < buf.size(); ++i) image.at(i) = buf[i] / 255.0;
    return image;
}

// map [H, W] or [H, W, 1] with values in [0, 1]
inline void write_pgm(const std::filesystem::path& path, const Tensor& map) {
    if (!(map.rank() == 2 || (map.rank() == 3 && map.dim(2) == 1)))
        throw ShapeError("write_pgm: expected [H, W] or [H, W, 1], got " +
                         shape_str(map.shape()));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    const size_t h = map.dim(0), w = map.dim(1);
    os << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> buf(h * w);
    for (size_t i = 0; i < h * w; ++i) buf[i] = detail::quantize(map.at(i));
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

// Returns [H, W, 1].
inline Tensor read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    char m0 = static_cast<char>(is.get()), m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '5')
        throw IoError("corrupt netpbm header in " + path.string() + " at byte 0: not P5");
    const size_t w = detail::pbm_token(is, path.string());
    const size_t h = detail::pbm_token(is, path.string());
    const int maxval = detail::pbm_token(is, path.string());
    if (maxval != 255)
        throw IoError("unsupported maxval " + std::to_string(maxval) + " in " +
                      path.string());
    Tensor map(Shape{h, w, 1});
    std::vector<unsigned char> buf(w * h);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(is.gcount()) != buf.size())
        throw IoError("truncated pixel data in " + path.string() + " at byte " +
                      std::to_string(static_cast<long>(is.tellg())));
    for (size_t i = 0; i < buf.size(); ++i) map.at(i) = buf[i] / 255.0;
    return map;
}

} // namespace ftcm
