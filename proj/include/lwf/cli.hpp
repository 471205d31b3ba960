#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lwf/metrics.hpp"
#include "lwf/runconfig.hpp"
#include "lwf/trainer.hpp"
#include "lwf/vocab.hpp"

namespace lwf {

// Command implementations behind the `lwf` binary. They throw library
// errors; run_cli maps those onto process exit codes:
//   0 success
//   2 usage, file format, or data problems
//   3 semantic mismatches (vocabulary or parameter shapes)
//   4 numeric failures and anything unclassified
//
// Every command is a pure function of (config, seed, inputs): re-running
// rewrites byte-identical artifacts. Wall-clock timestamps only ever go
// to the separate run_meta.json.

// Writes the "ori" and "new" dataset trees under out_dir.
void cmd_synth(const RunConfig& cfg, const std::string& out_dir, bool force);

// Trains a model on <data>/train.csv against <data>/val.csv and writes
// teacher.lwfc, vocab.txt, and pretrain_log.json under out_dir.
PretrainResult cmd_pretrain(const RunConfig& cfg, const std::string& data_dir,
                            const std::string& out_dir);

// Clones the teacher, streams <stream>/train.csv through it once, and
// writes snapshot checkpoints plus trace.json (loss rows and snapshot
// evaluations on <ori>/eval.csv and <stream>/eval.csv) under out_dir.
ContinualRunResult cmd_continual(const RunConfig& cfg, const std::string& teacher_path,
                                 const std::string& stream_dir, const std::string& ori_dir,
                                 const std::string& out_dir);

struct SweepCell {
    int batch_size = 0;
    double lambda = 0.0;
    double spider_ori = 0.0;
    double spider_new = 0.0;
    bool failed = false;
    std::string error;
};

// One continual run per (lambda, batch size) cell, all from the same
// teacher; writes results.csv and results.json under out_dir. A failing
// cell is marked and the sweep continues.
std::vector<SweepCell> cmd_sweep(const RunConfig& cfg, const std::string& teacher_path,
                                 const std::string& stream_dir, const std::string& ori_dir,
                                 const std::vector<double>& lambdas,
                                 const std::vector<int>& batch_sizes,
                                 const std::string& out_dir);

// Scores a checkpoint on <data>/<split>.csv; writes eval_report.json
// under out_dir when one is given.
EvalReport cmd_evaluate(const std::string& checkpoint_path, const std::string& data_dir,
                        const std::string& split, const std::string& out_dir);

// The sweep grid used when no --lambdas / --batch-sizes are given.
extern const std::vector<double> kDefaultSweepLambdas;
extern const std::vector<int> kDefaultSweepBatchSizes;

// Serialization shared by commands and tests.
nlohmann::json eval_report_to_json(const EvalReport& report);
// Structural check mirroring docs/eval_report.schema.json, including the
// exact spider = (cider + spice) / 2 identity; throws FormatError.
void validate_eval_report_json(const nlohmann::json& report);
// Parses a trace file and enforces its invariants: every row satisfies
// l_tot = (1 - lambda) * l_new + lambda * l_reg exactly, update indices
// increase strictly, and the teacher hash is unchanged.
nlohmann::json load_trace(const std::string& path);

// A checkpoint plus its vocabulary (vocab.txt next to the checkpoint
// file) and the run config embedded in it. A vocabulary whose size
// disagrees with the model is a VocabError.
struct LoadedModel {
    Model model;
    Vocabulary vocab;
    RunConfig config;
    uint64_t update_index = 0;
};
LoadedModel load_model_checkpoint(const std::string& checkpoint_path);

// Full command-line surface (verbs synth | pretrain | continual | sweep |
// evaluate); returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace lwf
