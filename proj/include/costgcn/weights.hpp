#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "costgcn/tensor.hpp"

namespace costgcn {

// Named tensors keyed by dotted path, e.g. "blocks.3.tcn.kernel".
using WeightStore = std::map<std::string, Tensor>;

// COSG container:
//   "COSG" | u32 LE version (1) | u64 LE header length | UTF-8 JSON header | payload
// The header is {"tensors": {name: {"shape": [...], "offset": n, "dtype": "f32"}}},
// offsets are byte offsets from the start of the payload, values little-endian f32.
inline constexpr char kCosgMagic[4] = {'C', 'O', 'S', 'G'};
inline constexpr std::uint32_t kCosgVersion = 1;

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(std::string_view in, std::size_t pos, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

}  // namespace detail

inline std::string encode_cosg(const WeightStore& store) {
    nlohmann::json tensors = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : store) {
        tensors[name] = {{"shape", t.shape()}, {"offset", offset}, {"dtype", "f32"}};
        offset += 4 * t.size();
    }
    const std::string header = nlohmann::json{{"tensors", tensors}}.dump();

    std::string out(kCosgMagic, 4);
    detail::put_le(out, kCosgVersion, 4);
    detail::put_le(out, header.size(), 8);
    out += header;
    out.reserve(out.size() + offset);
    for (const auto& [name, t] : store)
        for (float v : t.data()) detail::put_le(out, std::bit_cast<std::uint32_t>(v), 4);
    return out;
}

inline WeightStore decode_cosg(std::string_view bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCosgMagic, 4) != 0) throw FormatError("cosg: bad magic");
    if (bytes.size() < 8) throw FormatError("cosg: truncated version");
    const auto version = detail::get_le(bytes, 4, 4);
    if (version != kCosgVersion) throw FormatError("cosg: unsupported version " + std::to_string(version));
    if (bytes.size() < 16) throw FormatError("cosg: truncated header_len");
    const auto header_len = detail::get_le(bytes, 8, 8);
    if (header_len > bytes.size() - 16) throw FormatError("cosg: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(16, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("cosg: header is not valid JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("tensors") || !header["tensors"].is_object()) {
        throw FormatError("cosg: header lacks a 'tensors' object");
    }
    const std::string_view payload = bytes.substr(16 + header_len);

    struct Extent {
        std::uint64_t begin, end;
        std::string name;
    };
    std::vector<Extent> extents;
    WeightStore store;
    for (const auto& [name, entry] : header["tensors"].items()) {
        const std::string where = "cosg: tensor '" + name + "': ";
        if (!entry.is_object()) throw FormatError(where + "entry is not an object");
        if (entry.value("dtype", std::string()) != "f32") throw FormatError(where + "dtype must be \"f32\"");
        if (!entry.contains("shape") || !entry["shape"].is_array()) throw FormatError(where + "missing shape");
        if (!entry.contains("offset") || !entry["offset"].is_number_unsigned()) throw FormatError(where + "bad offset");
        Shape shape;
        for (const auto& d : entry["shape"]) {
            if (!d.is_number_unsigned()) throw FormatError(where + "shape entries must be non-negative integers");
            shape.push_back(d.get<std::size_t>());
        }
        const std::uint64_t offset = entry["offset"].get<std::uint64_t>();
        const std::uint64_t count = shape_size(shape);
        if (offset > payload.size() || count * 4 > payload.size() - offset) {
            throw FormatError(where + "payload truncated");
        }
        std::vector<float> data(count);
        for (std::uint64_t i = 0; i < count; ++i)
            data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(payload, offset + 4 * i, 4)));
        if (count) extents.push_back({offset, offset + 4 * count, name});
        store.emplace(name, Tensor(std::move(shape), std::move(data)));
    }
    std::sort(extents.begin(), extents.end(), [](const Extent& a, const Extent& b) { return a.begin < b.begin; });
    for (std::size_t i = 1; i < extents.size(); ++i) {
        if (extents[i].begin < extents[i - 1].end) {
            throw FormatError("cosg: tensors '" + extents[i - 1].name + "' and '" + extents[i].name + "' overlap");
        }
    }
    return store;
}

inline void save_weights(const std::filesystem::path& path, const WeightStore& store) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    const std::string bytes = encode_cosg(store);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw FormatError("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline WeightStore load_weights(const std::filesystem::path& path) { return decode_cosg(read_file(path)); }

}  // namespace costgcn
