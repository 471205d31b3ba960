#include "lwf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "lwf/error.hpp"

namespace lwf {

namespace {

constexpr char kMagic[4] = {'L', 'W', 'F', 'C'};

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, double d) {
    const float f = static_cast<float>(d);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(buf, bits);
}

void put_f64(std::string& buf, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(buf, bits);
}

// Bounds-checked cursor over the raw file bytes; every read failure
// reports the byte offset where the file fell short.
class Reader {
public:
    Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

    size_t offset() const { return pos_; }
    bool exhausted() const { return pos_ == buf_.size(); }

    const unsigned char* take(size_t n, const char* what) {
        if (buf_.size() - pos_ < n) {
            throw FormatError("checkpoint " + path_ + ": truncated while reading " + what +
                              " at offset " + std::to_string(pos_));
        }
        const auto* p = reinterpret_cast<const unsigned char*>(buf_.data()) + pos_;
        pos_ += n;
        return p;
    }

    uint32_t u32(const char* what) {
        const unsigned char* p = take(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
        return v;
    }

    uint64_t u64(const char* what) {
        const unsigned char* p = take(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        return v;
    }

    double f32(const char* what) {
        const uint32_t bits = u32(what);
        float f;
        std::memcpy(&f, &bits, 4);
        return static_cast<double>(f);
    }

    double f64(const char* what) {
        const uint64_t bits = u64(what);
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }

    std::string bytes(size_t n, const char* what) {
        const unsigned char* p = take(n, what);
        return std::string(reinterpret_cast<const char*>(p), n);
    }

    void fail(const std::string& message) const {
        throw FormatError("checkpoint " + path_ + ": " + message + " at offset " +
                          std::to_string(pos_));
    }

private:
    const std::string& buf_;
    std::string path_;
    size_t pos_ = 0;
};

size_t record_numel(const ParamRecord& rec, const std::string& path) {
    size_t n = 1;
    for (int d : rec.shape) {
        if (d <= 0) {
            throw FormatError("checkpoint " + path + ": parameter '" + rec.name +
                              "' has a non-positive dimension");
        }
        n *= static_cast<size_t>(d);
    }
    return n;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, ckpt.version);
    put_u64(buf, ckpt.update_index);
    put_u64(buf, ckpt.config_text.size());
    buf.append(ckpt.config_text);
    if (ckpt.params.size() > std::numeric_limits<uint32_t>::max()) {
        throw FormatError("checkpoint " + path + ": too many parameter records");
    }
    put_u32(buf, static_cast<uint32_t>(ckpt.params.size()));
    for (const ParamRecord& rec : ckpt.params) {
        const size_t numel = record_numel(rec, path);
        if (rec.values.size() != numel) {
            throw FormatError("checkpoint " + path + ": parameter '" + rec.name + "' holds " +
                              std::to_string(rec.values.size()) + " values for shape of " +
                              std::to_string(numel));
        }
        put_u32(buf, static_cast<uint32_t>(rec.name.size()));
        buf.append(rec.name);
        put_u32(buf, static_cast<uint32_t>(rec.shape.size()));
        for (int d : rec.shape) put_u32(buf, static_cast<uint32_t>(d));
        for (double x : rec.values) put_f32(buf, x);
    }
    buf.push_back(ckpt.optimizer.has_value() ? '\x01' : '\x00');
    if (ckpt.optimizer) {
        const OptimizerRecord& opt = *ckpt.optimizer;
        if (opt.m.size() != ckpt.params.size() || opt.v.size() != ckpt.params.size()) {
            throw FormatError("checkpoint " + path +
                              ": optimizer slots do not match the parameter records");
        }
        put_u64(buf, opt.t);
        for (size_t i = 0; i < ckpt.params.size(); ++i) {
            const size_t numel = ckpt.params[i].values.size();
            if (opt.m[i].size() != numel || opt.v[i].size() != numel) {
                throw FormatError("checkpoint " + path + ": optimizer moments for '" +
                                  ckpt.params[i].name + "' do not match its size");
            }
            for (double x : opt.m[i]) put_f64(buf, x);
            for (double x : opt.v[i]) put_f64(buf, x);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint file for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("failed writing checkpoint file: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(buf, path);

    const unsigned char* magic = r.take(4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("checkpoint " + path + ": bad magic at offset 0");
    }
    Checkpoint ckpt;
    ckpt.version = r.u32("format version");
    if (ckpt.version != kCheckpointVersion) {
        throw FormatError("checkpoint " + path + ": unsupported format version " +
                          std::to_string(ckpt.version) + " (this build reads version " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    ckpt.update_index = r.u64("update index");
    const uint64_t config_len = r.u64("config length");
    if (config_len > buf.size()) r.fail("implausible config length");
    ckpt.config_text = r.bytes(static_cast<size_t>(config_len), "config text");

    const uint32_t n_records = r.u32("record count");
    if (n_records > (1u << 20)) r.fail("implausible record count");
    ckpt.params.resize(n_records);
    for (uint32_t i = 0; i < n_records; ++i) {
        ParamRecord& rec = ckpt.params[i];
        const uint32_t name_len = r.u32("name length");
        if (name_len > (1u << 16)) r.fail("implausible parameter name length");
        rec.name = r.bytes(name_len, "parameter name");
        const uint32_t rank = r.u32("rank");
        if (rank > 8) r.fail("implausible rank for parameter '" + rec.name + "'");
        rec.shape.resize(rank);
        size_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            const uint32_t dim = r.u32("dimension");
            if (dim == 0 || dim > (1u << 24)) {
                r.fail("implausible dimension for parameter '" + rec.name + "'");
            }
            rec.shape[d] = static_cast<int>(dim);
            numel *= dim;
        }
        rec.values.resize(numel);
        for (size_t k = 0; k < numel; ++k) rec.values[k] = r.f32("parameter values");
    }

    const unsigned char* flag = r.take(1, "optimizer flag");
    if (*flag > 1) r.fail("invalid optimizer flag");
    if (*flag == 1) {
        OptimizerRecord opt;
        opt.t = r.u64("optimizer step count");
        opt.m.resize(n_records);
        opt.v.resize(n_records);
        for (uint32_t i = 0; i < n_records; ++i) {
            const size_t numel = ckpt.params[i].values.size();
            opt.m[i].resize(numel);
            opt.v[i].resize(numel);
            for (size_t k = 0; k < numel; ++k) opt.m[i][k] = r.f64("first moments");
            for (size_t k = 0; k < numel; ++k) opt.v[i][k] = r.f64("second moments");
        }
        ckpt.optimizer = std::move(opt);
    }
    if (!r.exhausted()) r.fail("trailing bytes after the optimizer section");
    return ckpt;
}

Checkpoint checkpoint_from_model(const Model& model, const std::string& config_text,
                                 uint64_t update_index) {
    Checkpoint ckpt;
    ckpt.update_index = update_index;
    ckpt.config_text = config_text;
    ckpt.params.reserve(model.param_count_tensors());
    for (const std::string& name : model.param_names()) {
        const Tensor& p = model.param(name);
        ParamRecord rec;
        rec.name = name;
        rec.shape = p.shape();
        const auto d = p.data();
        rec.values.assign(d.begin(), d.end());
        ckpt.params.push_back(std::move(rec));
    }
    return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, Model& model) {
    if (ckpt.params.size() != model.param_count_tensors()) {
        throw FormatError("checkpoint holds " + std::to_string(ckpt.params.size()) +
                          " parameter records, model expects " +
                          std::to_string(model.param_count_tensors()));
    }
    std::vector<std::pair<std::string, std::vector<double>>> named;
    named.reserve(ckpt.params.size());
    for (const ParamRecord& rec : ckpt.params) {
        const Tensor& p = model.param(rec.name);  // throws on unknown name
        if (p.shape() != rec.shape) {
            throw ShapeError("checkpoint parameter '" + rec.name + "' has shape " +
                             shape_str(rec.shape) + ", model expects " + shape_str(p.shape()));
        }
        named.emplace_back(rec.name, rec.values);
    }
    model.load_param_values(named);
}

}  // namespace lwf
