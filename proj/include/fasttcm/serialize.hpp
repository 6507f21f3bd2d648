#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fasttcm/tensor.hpp"

namespace ftcm {

// Binary tensor format: magic "FTCM", version u32, rank u32, extents u64*rank,
// then little-endian float64 payload. Containers wrap named sections of
// arbitrary payload bytes; tensor sections hold named tensor records.

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw IoError("write failed");
}

inline void get_bytes(std::istream& is, void* p, size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is.gcount()) != n)
        throw IoError(std::string("unexpected end of stream reading ") + what +
                      " at byte " + std::to_string(static_cast<long>(is.tellg())));
}

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(os, b, 8);
}

inline uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    get_bytes(is, b, 4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

inline uint64_t get_u64(std::istream& is, const char* what) {
    unsigned char b[8];
    get_bytes(is, b, 8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void put_f64(std::ostream& os, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    put_u64(os, u);
}

inline double get_f64(std::istream& is, const char* what) {
    const uint64_t u = get_u64(is, what);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

} // namespace detail

inline constexpr uint32_t kTensorFormatVersion = 1;
inline constexpr uint32_t kContainerFormatVersion = 1;

inline void write_tensor(std::ostream& os, const Tensor& t) {
    detail::put_bytes(os, "FTCM", 4);
    detail::put_u32(os, kTensorFormatVersion);
    detail::put_u32(os, static_cast<uint32_t>(t.rank()));
    for (size_t d : t.shape()) detail::put_u64(os, d);
    for (size_t i = 0; i < t.size(); ++i) detail::put_f64(os, t.at(i));
}

inline Tensor read_tensor(std::istream& is) {
    char magic[4];
    const auto start = is.tellg();
    detail::get_bytes(is, magic, 4, "tensor magic");
    if (std::memcmp(magic, "FTCM", 4) != 0)
        throw IoError("bad tensor magic at byte " +
                      std::to_string(static_cast<long>(start)));
    const uint32_t version = detail::get_u32(is, "tensor version");
    if (version != kTensorFormatVersion)
        throw IoError("unsupported tensor format version " + std::to_string(version));
    const uint32_t rank = detail::get_u32(is, "tensor rank");
    if (rank > 8) throw IoError("implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    for (uint32_t i = 0; i < rank; ++i)
        shape[i] = static_cast<size_t>(detail::get_u64(is, "tensor extent"));
    std::vector<double> data(numel(shape));
    for (double& v : data) v = detail::get_f64(is, "tensor payload");
    return Tensor::from_data(std::move(shape), std::move(data));
}

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline void write_named_tensors(std::ostream& os, const NamedTensors& items) {
    detail::put_u32(os, static_cast<uint32_t>(items.size()));
    for (const auto& [name, tensor] : items) {
        detail::put_u32(os, static_cast<uint32_t>(name.size()));
        detail::put_bytes(os, name.data(), name.size());
        write_tensor(os, tensor);
    }
}

inline NamedTensors read_named_tensors(std::istream& is) {
    const uint32_t count = detail::get_u32(is, "record count");
    NamedTensors items;
    items.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t len = detail::get_u32(is, "record name length");
        std::string name(len, '\0');
        detail::get_bytes(is, name.data(), len, "record name");
        items.emplace_back(std::move(name), read_tensor(is));
    }
    return items;
}

struct ContainerSection {
    std::string name;
    std::vector<char> payload;
};

inline std::vector<char> pack_named_tensors(const NamedTensors& items) {
    std::ostringstream os(std::ios::binary);
    write_named_tensors(os, items);
    const std::string s = os.str();
    return std::vector<char>(s.begin(), s.end());
}

inline NamedTensors unpack_named_tensors(const std::vector<char>& payload) {
    std::istringstream is(std::string(payload.begin(), payload.end()), std::ios::binary);
    return read_named_tensors(is);
}

inline std::vector<char> pack_string(const std::string& s) {
    return std::vector<char>(s.begin(), s.end());
}

inline std::string unpack_string(const std::vector<char>& payload) {
    return std::string(payload.begin(), payload.end());
}

inline void write_container(std::ostream& os,
                            const std::vector<ContainerSection>& sections) {
    detail::put_bytes(os, "FTCM", 4);
    detail::put_u32(os, kContainerFormatVersion);
    detail::put_u32(os, static_cast<uint32_t>(sections.size()));
    for (const auto& s : sections) {
        detail::put_u32(os, static_cast<uint32_t>(s.name.size()));
        detail::put_bytes(os, s.name.data(), s.name.size());
        detail::put_u64(os, s.payload.size());
        detail::put_bytes(os, s.payload.data(), s.payload.size());
    }
}

inline std::vector<ContainerSection> read_container(std::istream& is) {
    char magic[4];
    detail::get_bytes(is, magic, 4, "container magic");
    if (std::memcmp(magic, "FTCM", 4) != 0) throw IoError("bad container magic");
    const uint32_t version = detail::get_u32(is, "container version");
    if (version != kContainerFormatVersion)
        throw IoError("unsupported container version " + std::to_string(version));
    const uint32_t count = detail::get_u32(is, "section count");
    std::vector<ContainerSection> sections;
    sections.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        ContainerSection s;
        const uint32_t len = detail::get_u32(is, "section name length");
        s.name.resize(len);
        detail::get_bytes(is, s.name.data(), len, "section name");
        const uint64_t plen = detail::get_u64(is, "section payload length");
        s.payload.resize(plen);
        detail::get_bytes(is, s.payload.data(), plen, "section payload");
        sections.push_back(std::move(s));
    }
    return sections;
}

inline void write_container_file(const std::filesystem::path& path,
                                 const std::vector<ContainerSection>& sections) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    write_container(os, sections);
}

inline std::vector<ContainerSection> read_container_file(
    const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    return read_container(is);
}

inline const ContainerSection& find_section(const std::vector<ContainerSection>& sections,
                                            const std::string& name) {
    for (const auto& s : sections)
        if (s.name == name) return s;
    throw IoError("missing container section '" + name + "'");
}

} // namespace ftcm
