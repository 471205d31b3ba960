#include "lwf/runconfig.hpp"

#include <cerrno>
#include <charconv>
#include <climits>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "lwf/error.hpp"

namespace lwf {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void value_error(const std::string& key, int line, const char* want,
                              const std::string& got) {
    throw FormatError("config line " + std::to_string(line) + ": key '" + key + "' expects " +
                      want + ", got '" + got + "'");
}

long long to_ll(const std::string& v, const std::string& key, int line) {
    if (v.empty()) value_error(key, line, "an integer", v);
    char* end = nullptr;
    errno = 0;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (errno != 0 || end != v.c_str() + v.size()) value_error(key, line, "an integer", v);
    return x;
}

int to_int(const std::string& v, const std::string& key, int line) {
    const long long x = to_ll(v, key, line);
    if (x < INT_MIN || x > INT_MAX) value_error(key, line, "a 32-bit integer", v);
    return static_cast<int>(x);
}

uint64_t to_u64(const std::string& v, const std::string& key, int line) {
    if (v.empty() || v[0] == '-') value_error(key, line, "a non-negative integer", v);
    char* end = nullptr;
    errno = 0;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (errno != 0 || end != v.c_str() + v.size()) {
        value_error(key, line, "a non-negative integer", v);
    }
    return x;
}

double to_double(const std::string& v, const std::string& key, int line) {
    if (v.empty()) value_error(key, line, "a number", v);
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size()) value_error(key, line, "a number", v);
    return x;
}

bool to_bool(const std::string& v, const std::string& key, int line) {
    if (v == "true") return true;
    if (v == "false") return false;
    value_error(key, line, "'true' or 'false'", v);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> parts;
    if (trim(v).empty()) return parts;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, ',')) parts.push_back(trim(item));
    return parts;
}

std::vector<int> to_int_list(const std::string& v, const std::string& key, int line) {
    std::vector<int> out;
    for (const std::string& item : split_list(v)) out.push_back(to_int(item, key, line));
    return out;
}

std::vector<uint64_t> to_u64_list(const std::string& v, const std::string& key, int line) {
    std::vector<uint64_t> out;
    for (const std::string& item : split_list(v)) out.push_back(to_u64(item, key, line));
    return out;
}

void apply_key(RunConfig& rc, const std::string& key, const std::string& value, int line) {
    // clang-format off
    if      (key == "seed")                          rc.seed = to_u64(value, key, line);
    else if (key == "model.n_mels")                  rc.model.n_mels = to_int(value, key, line);
    else if (key == "model.d_model")                 rc.model.d_model = to_int(value, key, line);
    else if (key == "model.n_temporal_blocks")       rc.model.n_temporal_blocks = to_int(value, key, line);
    else if (key == "model.dilation_schedule")       rc.model.dilation_schedule = to_int_list(value, key, line);
    else if (key == "model.n_tf_blocks")             rc.model.n_tf_blocks = to_int(value, key, line);
    else if (key == "model.n_decoder_blocks")        rc.model.n_decoder_blocks = to_int(value, key, line);
    else if (key == "model.n_heads")                 rc.model.n_heads = to_int(value, key, line);
    else if (key == "model.vocab_size")              rc.model.vocab_size = to_int(value, key, line);
    else if (key == "model.max_caption_len")         rc.model.max_caption_len = to_int(value, key, line);
    else if (key == "model.classifier_temperature")  rc.model.classifier_temperature = to_double(value, key, line);
    else if (key == "adam.alpha")                    rc.pretrain.adam.alpha = rc.continual.adam.alpha = to_double(value, key, line);
    else if (key == "adam.beta1")                    rc.pretrain.adam.beta1 = rc.continual.adam.beta1 = to_double(value, key, line);
    else if (key == "adam.beta2")                    rc.pretrain.adam.beta2 = rc.continual.adam.beta2 = to_double(value, key, line);
    else if (key == "adam.eps")                      rc.pretrain.adam.eps = rc.continual.adam.eps = to_double(value, key, line);
    else if (key == "pretrain.batch_size")           rc.pretrain.batch_size = to_int(value, key, line);
    else if (key == "pretrain.max_epochs")           rc.pretrain.max_epochs = to_int(value, key, line);
    else if (key == "pretrain.shuffle_seed")         rc.pretrain.shuffle_seed = to_u64(value, key, line);
    else if (key == "pretrain.patience")             rc.pretrain.stop.patience = to_int(value, key, line);
    else if (key == "pretrain.monitor")              rc.pretrain.stop.monitor = value;
    else if (key == "continual.lambda")              rc.continual.lambda = to_double(value, key, line);
    else if (key == "continual.batch_size")          rc.continual.batch_size = to_int(value, key, line);
    else if (key == "continual.distill_temperature") rc.continual.distill_temperature = to_double(value, key, line);
    else if (key == "continual.checkpoint_updates")  rc.continual.checkpoint_updates = to_u64_list(value, key, line);
    else if (key == "continual.eval_at_end")         rc.continual.eval_at_end = to_bool(value, key, line);
    else if (key == "continual.shuffle_seed")        rc.continual.shuffle_seed = to_u64(value, key, line);
    else if (key == "stream.single_pass")            rc.stream_single_pass = to_bool(value, key, line);
    else if (key == "synth.n_classes")               rc.synth.n_classes = to_int(value, key, line);
    else if (key == "synth.frames")                  rc.synth.frames = to_int(value, key, line);
    else if (key == "synth.vocab_words")             rc.synth.vocab_words = to_int(value, key, line);
    else if (key == "synth.overlap")                 rc.synth.overlap = to_double(value, key, line);
    else if (key == "synth.feature_noise")           rc.synth.feature_noise = to_double(value, key, line);
    else if (key == "synth.ori_train_clips")         rc.synth.ori_train_clips = to_int(value, key, line);
    else if (key == "synth.ori_val_clips")           rc.synth.ori_val_clips = to_int(value, key, line);
    else if (key == "synth.ori_eval_clips")          rc.synth.ori_eval_clips = to_int(value, key, line);
    else if (key == "synth.ori_captions_per_clip")   rc.synth.ori_captions_per_clip = to_int(value, key, line);
    else if (key == "synth.new_train_clips")         rc.synth.new_train_clips = to_int(value, key, line);
    else if (key == "synth.new_val_clips")           rc.synth.new_val_clips = to_int(value, key, line);
    else if (key == "synth.new_eval_clips")          rc.synth.new_eval_clips = to_int(value, key, line);
    else if (key == "synth.new_captions_per_clip")   rc.synth.new_captions_per_clip = to_int(value, key, line);
    else if (key == "paths.data")                    rc.data_path = value;
    else if (key == "paths.out")                     rc.out_path = value;
    else if (key == "paths.teacher")                 rc.teacher_path = value;
    else if (key == "paths.stream_data")             rc.stream_path = value;
    else if (key == "paths.ori_data")                rc.ori_path = value;
    else {
        throw ConfigError("unknown configuration key '" + key + "' (line " +
                          std::to_string(line) + ")");
    }
    // clang-format on
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig rc;
    std::set<std::string> seen;
    std::istringstream ss(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        const size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw FormatError("config line " + std::to_string(line_no) + ": empty key");
        }
        if (!seen.insert(key).second) {
            throw ConfigError("duplicate configuration key '" + key + "' (line " +
                              std::to_string(line_no) + ")");
        }
        apply_key(rc, key, value, line_no);
    }
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string serialize_run_config(const RunConfig& cfg) {
    if (!(cfg.pretrain.adam == cfg.continual.adam)) {
        throw ConfigError(
            "config serialization: the adam settings differ between the pre-training and "
            "continual phases, but the file format shares them");
    }
    std::string s;
    const auto put = [&s](const char* key, const std::string& value) {
        s += key;
        s += value.empty() ? " =" : " = " + value;
        s += '\n';
    };
    const auto join_ints = [](const auto& xs) {
        std::string v;
        for (size_t i = 0; i < xs.size(); ++i) {
            if (i > 0) v += ',';
            v += std::to_string(xs[i]);
        }
        return v;
    };

    put("seed", std::to_string(cfg.seed));
    s += "\n# model architecture\n";
    put("model.n_mels", std::to_string(cfg.model.n_mels));
    put("model.d_model", std::to_string(cfg.model.d_model));
    put("model.n_temporal_blocks", std::to_string(cfg.model.n_temporal_blocks));
    put("model.dilation_schedule", join_ints(cfg.model.dilation_schedule));
    put("model.n_tf_blocks", std::to_string(cfg.model.n_tf_blocks));
    put("model.n_decoder_blocks", std::to_string(cfg.model.n_decoder_blocks));
    put("model.n_heads", std::to_string(cfg.model.n_heads));
    put("model.vocab_size", std::to_string(cfg.model.vocab_size));
    put("model.max_caption_len", std::to_string(cfg.model.max_caption_len));
    put("model.classifier_temperature", format_double(cfg.model.classifier_temperature));
    s += "\n# optimizer, shared by both phases\n";
    put("adam.alpha", format_double(cfg.pretrain.adam.alpha));
    put("adam.beta1", format_double(cfg.pretrain.adam.beta1));
    put("adam.beta2", format_double(cfg.pretrain.adam.beta2));
    put("adam.eps", format_double(cfg.pretrain.adam.eps));
    s += "\n# pre-training\n";
    put("pretrain.batch_size", std::to_string(cfg.pretrain.batch_size));
    put("pretrain.max_epochs", std::to_string(cfg.pretrain.max_epochs));
    put("pretrain.shuffle_seed", std::to_string(cfg.pretrain.shuffle_seed));
    put("pretrain.patience", std::to_string(cfg.pretrain.stop.patience));
    put("pretrain.monitor", cfg.pretrain.stop.monitor);
    s += "\n# continual stream\n";
    put("continual.lambda", format_double(cfg.continual.lambda));
    put("continual.batch_size", std::to_string(cfg.continual.batch_size));
    put("continual.distill_temperature", format_double(cfg.continual.distill_temperature));
    put("continual.checkpoint_updates", join_ints(cfg.continual.checkpoint_updates));
    put("continual.eval_at_end", cfg.continual.eval_at_end ? "true" : "false");
    put("continual.shuffle_seed", std::to_string(cfg.continual.shuffle_seed));
    put("stream.single_pass", cfg.stream_single_pass ? "true" : "false");
    s += "\n# synthetic data\n";
    put("synth.n_classes", std::to_string(cfg.synth.n_classes));
    put("synth.frames", std::to_string(cfg.synth.frames));
    put("synth.vocab_words", std::to_string(cfg.synth.vocab_words));
    put("synth.overlap", format_double(cfg.synth.overlap));
    put("synth.feature_noise", format_double(cfg.synth.feature_noise));
    put("synth.ori_train_clips", std::to_string(cfg.synth.ori_train_clips));
    put("synth.ori_val_clips", std::to_string(cfg.synth.ori_val_clips));
    put("synth.ori_eval_clips", std::to_string(cfg.synth.ori_eval_clips));
    put("synth.ori_captions_per_clip", std::to_string(cfg.synth.ori_captions_per_clip));
    put("synth.new_train_clips", std::to_string(cfg.synth.new_train_clips));
    put("synth.new_val_clips", std::to_string(cfg.synth.new_val_clips));
    put("synth.new_eval_clips", std::to_string(cfg.synth.new_eval_clips));
    put("synth.new_captions_per_clip", std::to_string(cfg.synth.new_captions_per_clip));

    std::string paths;
    const auto put_path = [&paths](const char* key, const std::string& value) {
        if (!value.empty()) {
            paths += key;
            paths += " = " + value + "\n";
        }
    };
    put_path("paths.data", cfg.data_path);
    put_path("paths.out", cfg.out_path);
    put_path("paths.teacher", cfg.teacher_path);
    put_path("paths.stream_data", cfg.stream_path);
    put_path("paths.ori_data", cfg.ori_path);
    if (!paths.empty()) s += "\n# paths\n" + paths;
    return s;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open config file for writing: " + path);
    out << serialize_run_config(cfg);
    if (!out) throw DataError("failed writing config file: " + path);
}

}  // namespace lwf
