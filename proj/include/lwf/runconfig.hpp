#pragma once

#include <cstdint>
#include <string>

#include "lwf/model.hpp"
#include "lwf/synth.hpp"
#include "lwf/trainer.hpp"

namespace lwf {

// Every tunable of the command-line surface, parseable from a config file
// of line-oriented UTF-8 `key = value` pairs. `#` starts a comment, blank
// lines are skipped, nested names are dotted (model.d_model). Unknown and
// duplicated keys are rejected so a typo in a sweep cannot pass silently.
//
// The `adam.*` keys feed both training phases (the phases differ by their
// optimizer *state*, which the continual run always starts fresh, not by
// their hyperparameters). The continual stream is single-pass by
// construction; `stream.single_pass = false` is rejected.
struct RunConfig {
    uint64_t seed = 7;
    ModelConfig model;
    PretrainConfig pretrain;     // pretrain.* and adam.*
    ContinualRunConfig continual;  // continual.* and adam.*
    SynthConfig synth;           // synth.*
    bool stream_single_pass = true;

    // Optional path defaults; command-line flags take precedence.
    std::string data_path;     // paths.data
    std::string out_path;      // paths.out
    std::string teacher_path;  // paths.teacher
    std::string stream_path;   // paths.stream_data
    std::string ori_path;      // paths.ori_data

    bool operator==(const RunConfig&) const = default;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Canonical text form: every non-path key explicitly, grouped by section,
// paths only when set. parse(serialize(c)) == c, and serializing the
// parse of a canonical text reproduces it byte for byte.
std::string serialize_run_config(const RunConfig& cfg);
void save_run_config(const RunConfig& cfg, const std::string& path);

// Shortest decimal form that parses back to the identical double; shared
// by the config writer and the result-table writers so artifacts are
// byte-stable across runs.
std::string format_double(double v);

}  // namespace lwf
