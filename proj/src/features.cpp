#include "lwf/features.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "lwf/error.hpp"

namespace lwf {

namespace {

constexpr char kMagic[4] = {'A', 'F', 'B', '1'};

void put_u32(std::string& buf, uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

Tensor quantize_f32(const Tensor& t) {
    Tensor out = t.detached_copy();
    for (auto& v : out.mutable_data()) v = static_cast<double>(static_cast<float>(v));
    return out;
}

void save_features(const Tensor& features, const std::string& path) {
    if (features.rank() != 2) {
        throw ShapeError("save_features: expected a [T, F] tensor, got " +
                         shape_str(features.shape()));
    }
    std::string buf;
    buf.reserve(12 + features.numel() * 4);
    buf.append(kMagic, 4);
    put_u32(buf, static_cast<uint32_t>(features.dim(0)));
    put_u32(buf, static_cast<uint32_t>(features.dim(1)));
    for (double d : features.data()) {
        const float f = static_cast<float>(d);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(buf, bits);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open feature file for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("failed writing feature file: " + path);
}

Tensor load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw FormatError("feature file " + path + ": bad magic at offset 0");
    }
    if (buf.size() < 12) {
        throw FormatError("feature file " + path + ": truncated header at offset " +
                          std::to_string(buf.size()));
    }
    const uint32_t t = get_u32(p + 4);
    const uint32_t f = get_u32(p + 8);
    if (t == 0 || f == 0 || t > 1u << 24 || f > 1u << 16) {
        throw FormatError("feature file " + path + ": implausible shape " + std::to_string(t) +
                          "x" + std::to_string(f) + " at offset 4");
    }
    const size_t expected = 12 + static_cast<size_t>(t) * f * 4;
    if (buf.size() != expected) {
        throw FormatError("feature file " + path + ": expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(buf.size()) + " (offset " +
                          std::to_string(std::min(buf.size(), expected)) + ")");
    }
    std::vector<double> data(static_cast<size_t>(t) * f);
    for (size_t i = 0; i < data.size(); ++i) {
        const uint32_t bits = get_u32(p + 12 + i * 4);
        float fv;
        std::memcpy(&fv, &bits, 4);
        data[i] = static_cast<double>(fv);
    }
    return Tensor({static_cast<int>(t), static_cast<int>(f)}, std::move(data));
}

}  // namespace lwf
