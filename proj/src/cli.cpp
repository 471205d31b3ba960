#include "lwf/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lwf/checkpoint.hpp"
#include "lwf/dataset.hpp"
#include "lwf/error.hpp"
#include "lwf/synth.hpp"

namespace lwf {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<double> kSweepLambdas = {0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 1.00};
const std::vector<int> kSweepBatchSizes = {4, 8, 12};

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("failed writing file: " + path);
}

void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("file " + path + " is not valid JSON: " + e.what());
    }
}

// The only artifact carrying wall-clock state; everything else must be
// byte-identical across re-runs.
void write_run_meta(const std::string& out_dir, const std::string& command) {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    write_json_file((fs::path(out_dir) / "run_meta.json").string(),
                    json{{"command", command}, {"written_at", stamp}});
}

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string checkpoint_file_name(uint64_t update_index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "checkpoint_%06llu.lwfc",
                  static_cast<unsigned long long>(update_index));
    return buf;
}

std::string manifest_path(const std::string& dataset_dir, const std::string& split) {
    return (fs::path(dataset_dir) / (split + ".csv")).string();
}

// Run config as embedded in checkpoints: the architecture that was
// actually built, no host paths.
std::string portable_config_text(const RunConfig& cfg, const ModelConfig& built) {
    RunConfig blob = cfg;
    blob.model = built;
    blob.data_path.clear();
    blob.out_path.clear();
    blob.teacher_path.clear();
    blob.stream_path.clear();
    blob.ori_path.clear();
    return serialize_run_config(blob);
}

const json& require_key(const json& j, const char* key, const char* where) {
    if (!j.contains(key)) {
        throw FormatError(std::string(where) + ": missing key '" + key + "'");
    }
    return j.at(key);
}

double require_finite_number(const json& j, const char* key, const char* where) {
    const json& v = require_key(j, key, where);
    if (!v.is_number()) {
        throw FormatError(std::string(where) + ": key '" + key + "' must be a number");
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
        throw FormatError(std::string(where) + ": key '" + key + "' must be finite");
    }
    return d;
}

json trace_checkpoint_entry(const CheckpointSnapshot& snap, const std::string& file_name) {
    return json{{"update_index", snap.update_index},
                {"file", file_name},
                {"eval_ori", eval_report_to_json(snap.eval_ori)},
                {"eval_new", eval_report_to_json(snap.eval_new)}};
}

std::string sweep_results_csv(const std::vector<SweepCell>& cells) {
    std::string s = "batch_size,lambda,spider_ori,spider_new\n";
    for (const SweepCell& c : cells) {
        s += std::to_string(c.batch_size) + "," + format_double(c.lambda) + ",";
        if (c.failed) {
            s += "failed,failed";
        } else {
            s += format_double(c.spider_ori) + "," + format_double(c.spider_new);
        }
        s += '\n';
    }
    return s;
}

json sweep_results_json(const std::vector<SweepCell>& cells, const std::vector<double>& lambdas,
                        const std::vector<int>& batch_sizes) {
    json rows = json::array();
    for (const SweepCell& c : cells) {
        json row{{"batch_size", c.batch_size}, {"lambda", c.lambda}};
        if (c.failed) {
            row["spider_ori"] = nullptr;
            row["spider_new"] = nullptr;
            row["status"] = "failed";
            row["error"] = c.error;
        } else {
            row["spider_ori"] = c.spider_ori;
            row["spider_new"] = c.spider_new;
            row["status"] = "ok";
        }
        rows.push_back(std::move(row));
    }
    return json{{"grid", json{{"lambdas", lambdas}, {"batch_sizes", batch_sizes}}},
                {"rows", std::move(rows)}};
}

std::vector<double> parse_double_list_flag(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        errno = 0;
        const double d = std::strtod(item.c_str(), &end);
        if (item.empty() || errno != 0 || end != item.c_str() + item.size()) {
            throw ConfigError(std::string(flag) + ": '" + item + "' is not a number");
        }
        out.push_back(d);
    }
    if (out.empty()) throw ConfigError(std::string(flag) + ": empty list");
    return out;
}

std::vector<int> parse_int_list_flag(const std::string& text, const char* flag) {
    std::vector<int> out;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        errno = 0;
        const long v = std::strtol(item.c_str(), &end, 10);
        if (item.empty() || errno != 0 || end != item.c_str() + item.size()) {
            throw ConfigError(std::string(flag) + ": '" + item + "' is not an integer");
        }
        out.push_back(static_cast<int>(v));
    }
    if (out.empty()) throw ConfigError(std::string(flag) + ": empty list");
    return out;
}

}  // namespace

const std::vector<double> kDefaultSweepLambdas = kSweepLambdas;
const std::vector<int> kDefaultSweepBatchSizes = kSweepBatchSizes;

json eval_report_to_json(const EvalReport& r) {
    return json{{"dataset_label", r.dataset_label},
                {"spice_impl", r.spice_impl},
                {"update_index", r.update_index},
                {"spider", r.spider},
                {"cider", r.cider},
                {"spice", r.spice},
                {"clip_ids", r.clip_ids},
                {"candidates", r.candidates},
                {"per_item_spider", r.per_item_spider},
                {"per_item_cider", r.per_item_cider},
                {"per_item_spice", r.per_item_spice}};
}

void validate_eval_report_json(const json& report) {
    const char* where = "eval report";
    if (!report.is_object()) throw FormatError("eval report: not a JSON object");
    for (const char* key : {"dataset_label", "spice_impl"}) {
        if (!require_key(report, key, where).is_string()) {
            throw FormatError(std::string(where) + ": key '" + key + "' must be a string");
        }
    }
    if (!require_key(report, "update_index", where).is_number_unsigned()) {
        throw FormatError("eval report: key 'update_index' must be a non-negative integer");
    }
    const double spider = require_finite_number(report, "spider", where);
    const double cider = require_finite_number(report, "cider", where);
    const double spice = require_finite_number(report, "spice", where);
    if (cider < 0.0 || spice < 0.0) {
        throw FormatError("eval report: scores must be non-negative");
    }
    if (spider != 0.5 * cider + 0.5 * spice) {
        throw FormatError("eval report: spider must equal the cider/spice midpoint");
    }
    for (const char* key : {"clip_ids", "candidates", "per_item_spider", "per_item_cider",
                            "per_item_spice"}) {
        if (!require_key(report, key, where).is_array()) {
            throw FormatError(std::string(where) + ": key '" + key + "' must be an array");
        }
    }
    const size_t n = report.at("clip_ids").size();
    for (const char* key : {"candidates", "per_item_spider", "per_item_cider", "per_item_spice"}) {
        if (report.at(key).size() != n) {
            throw FormatError(std::string(where) + ": key '" + key + "' must have " +
                              std::to_string(n) + " entries like 'clip_ids'");
        }
    }
    for (const json& v : report.at("clip_ids")) {
        if (!v.is_string()) throw FormatError("eval report: 'clip_ids' entries must be strings");
    }
    for (const json& v : report.at("candidates")) {
        if (!v.is_string()) throw FormatError("eval report: 'candidates' entries must be strings");
    }
    for (size_t i = 0; i < n; ++i) {
        const json& ps = report.at("per_item_spider").at(i);
        const json& pc = report.at("per_item_cider").at(i);
        const json& pp = report.at("per_item_spice").at(i);
        if (!ps.is_number() || !pc.is_number() || !pp.is_number()) {
            throw FormatError("eval report: per-item scores must be numbers");
        }
        if (ps.get<double>() != 0.5 * pc.get<double>() + 0.5 * pp.get<double>()) {
            throw FormatError("eval report: per-item spider must equal the per-item midpoint (" +
                              std::to_string(i) + ")");
        }
    }
}

json load_trace(const std::string& path) {
    const json trace = read_json_file(path);
    const char* where = "trace";
    if (!trace.is_object()) throw FormatError("trace " + path + ": not a JSON object");
    const double lambda = require_finite_number(trace, "lambda", where);
    if (!require_key(trace, "batch_size", where).is_number_integer()) {
        throw FormatError("trace " + path + ": key 'batch_size' must be an integer");
    }
    const json& before = require_key(trace, "teacher_hash_before", where);
    const json& after = require_key(trace, "teacher_hash_after", where);
    if (!before.is_string() || !after.is_string() ||
        before.get<std::string>() != after.get<std::string>()) {
        throw FormatError("trace " + path + ": the teacher hash changed during the run");
    }
    const json& rows = require_key(trace, "rows", where);
    if (!rows.is_array() || rows.empty()) {
        throw FormatError("trace " + path + ": key 'rows' must be a non-empty array");
    }
    uint64_t prev_index = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
        const json& row = rows.at(i);
        const std::string ctx = "trace row " + std::to_string(i);
        const double l_tot = require_finite_number(row, "l_tot", ctx.c_str());
        const double l_new = require_finite_number(row, "l_new", ctx.c_str());
        const double l_reg = require_finite_number(row, "l_reg", ctx.c_str());
        const double row_lambda = require_finite_number(row, "lambda", ctx.c_str());
        if (row_lambda != lambda) {
            throw FormatError(ctx + ": lambda disagrees with the run's lambda");
        }
        if (l_tot != (1.0 - row_lambda) * l_new + row_lambda * l_reg) {
            throw FormatError(ctx + ": violates l_tot = (1 - lambda) * l_new + lambda * l_reg");
        }
        const json& idx = require_key(row, "update_index", ctx.c_str());
        if (!idx.is_number_unsigned()) {
            throw FormatError(ctx + ": 'update_index' must be a non-negative integer");
        }
        const uint64_t index = idx.get<uint64_t>();
        if (index <= prev_index) {
            throw FormatError(ctx + ": update indices must increase strictly");
        }
        prev_index = index;
    }
    const json& checkpoints = require_key(trace, "checkpoints", where);
    if (!checkpoints.is_array()) {
        throw FormatError("trace " + path + ": key 'checkpoints' must be an array");
    }
    for (const json& entry : checkpoints) {
        require_key(entry, "update_index", "trace checkpoint");
        require_key(entry, "file", "trace checkpoint");
        validate_eval_report_json(require_key(entry, "eval_ori", "trace checkpoint"));
        validate_eval_report_json(require_key(entry, "eval_new", "trace checkpoint"));
    }
    return trace;
}

LoadedModel load_model_checkpoint(const std::string& checkpoint_path) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    RunConfig rc = parse_run_config(ck.config_text);
    const std::string vocab_path =
        (fs::path(checkpoint_path).parent_path() / "vocab.txt").string();
    Vocabulary vocab = load_vocabulary(vocab_path);
    if (vocab.size() != rc.model.vocab_size) {
        throw VocabError("vocabulary at " + vocab_path + " has " + std::to_string(vocab.size()) +
                         " tokens, but the checkpoint's model expects " +
                         std::to_string(rc.model.vocab_size));
    }
    Model model(rc.model, 0);
    apply_checkpoint(ck, model);
    return {std::move(model), std::move(vocab), std::move(rc), ck.update_index};
}

void cmd_synth(const RunConfig& cfg, const std::string& out_dir, bool force) {
    generate_datasets(cfg.synth, cfg.model.n_mels, cfg.seed, out_dir, force);
}

PretrainResult cmd_pretrain(const RunConfig& cfg, const std::string& data_dir,
                            const std::string& out_dir) {
    const Vocabulary vocab = load_vocabulary((fs::path(data_dir) / "vocab.txt").string());
    const auto train_clips = load_manifest(manifest_path(data_dir, "train"));
    const auto val_clips = load_manifest(manifest_path(data_dir, "val"));
    const auto examples = make_examples(train_clips, vocab, /*drop_oov=*/false);

    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();
    Model model(mc, cfg.seed);
    const PretrainResult result = pretrain(model, examples, val_clips, vocab, cfg.pretrain);

    fs::create_directories(out_dir);
    save_checkpoint(checkpoint_from_model(model, portable_config_text(cfg, mc), 0),
                    (fs::path(out_dir) / "teacher.lwfc").string());
    save_vocabulary(vocab, (fs::path(out_dir) / "vocab.txt").string());

    json entries = json::array();
    for (const PretrainLogEntry& e : result.log) {
        entries.push_back(json{{"epoch", e.epoch},
                               {"train_ce", e.train_ce},
                               {"val_spider", e.val_spider},
                               {"improved", e.improved}});
    }
    write_json_file((fs::path(out_dir) / "pretrain_log.json").string(),
                    json{{"entries", std::move(entries)},
                         {"best_epoch", result.best_epoch},
                         {"best_val_spider", result.best_val_spider},
                         {"epochs_run", result.epochs_run},
                         {"stopped_early", result.stopped_early}});
    write_run_meta(out_dir, "pretrain");
    return result;
}

ContinualRunResult cmd_continual(const RunConfig& cfg, const std::string& teacher_path,
                                 const std::string& stream_dir, const std::string& ori_dir,
                                 const std::string& out_dir) {
    cfg.continual.validate();
    if (!cfg.stream_single_pass) {
        throw ConfigError("the continual stream is single-pass; stream.single_pass = false "
                          "is not supported");
    }
    LoadedModel teacher = load_model_checkpoint(teacher_path);

    const auto stream_clips = load_manifest(manifest_path(stream_dir, "train"));
    std::vector<std::string> removed_words;
    const std::string stream_vocab_path = (fs::path(stream_dir) / "vocab.txt").string();
    if (fs::exists(stream_vocab_path)) {
        removed_words =
            intersect_vocabulary(load_vocabulary(stream_vocab_path), teacher.vocab).removed_words;
    }
    EncodeStats stats;
    const auto examples = make_examples(stream_clips, teacher.vocab, /*drop_oov=*/true, &stats);
    const auto eval_ori_clips = load_manifest(manifest_path(ori_dir, "eval"));
    const auto eval_new_clips = load_manifest(manifest_path(stream_dir, "eval"));

    Model student = clone_model(teacher.model);
    ContinualRunResult result = continual_run(teacher.model, student, examples, teacher.vocab,
                                              eval_ori_clips, eval_new_clips, cfg.continual);

    fs::create_directories(out_dir);
    const std::string config_text = portable_config_text(cfg, teacher.model.config());
    json checkpoint_entries = json::array();
    for (const CheckpointSnapshot& snap : result.checkpoints) {
        const std::string file_name = checkpoint_file_name(snap.update_index);
        Checkpoint ck;
        ck.update_index = snap.update_index;
        ck.config_text = config_text;
        ck.params.reserve(snap.params.size());
        for (const auto& [name, values] : snap.params) {
            ck.params.push_back({name, student.param(name).shape(), values});
        }
        save_checkpoint(ck, (fs::path(out_dir) / file_name).string());
        checkpoint_entries.push_back(trace_checkpoint_entry(snap, file_name));
    }
    save_vocabulary(teacher.vocab, (fs::path(out_dir) / "vocab.txt").string());

    json rows = json::array();
    for (const LossBreakdown& b : result.loss_trace) {
        rows.push_back(json{{"update_index", b.update_index},
                            {"l_tot", b.l_tot},
                            {"l_new", b.l_new},
                            {"l_reg", b.l_reg},
                            {"lambda", b.lambda}});
    }
    const std::string trace_path = (fs::path(out_dir) / "trace.json").string();
    write_json_file(trace_path,
                    json{{"lambda", cfg.continual.lambda},
                         {"batch_size", cfg.continual.batch_size},
                         {"distill_temperature", cfg.continual.distill_temperature},
                         {"total_updates", result.loss_trace.size()},
                         {"dropped_words", stats.dropped_words},
                         {"removed_words", removed_words},
                         {"teacher_hash_before", hash_hex(result.teacher_hash_before)},
                         {"teacher_hash_after", hash_hex(result.teacher_hash_after)},
                         {"rows", std::move(rows)},
                         {"checkpoints", std::move(checkpoint_entries)}});
    load_trace(trace_path);  // the artifact must pass its own validator
    write_run_meta(out_dir, "continual");
    return result;
}

std::vector<SweepCell> cmd_sweep(const RunConfig& cfg, const std::string& teacher_path,
                                 const std::string& stream_dir, const std::string& ori_dir,
                                 const std::vector<double>& lambdas,
                                 const std::vector<int>& batch_sizes,
                                 const std::string& out_dir) {
    if (lambdas.empty() || batch_sizes.empty()) {
        throw ConfigError("sweep: the lambda and batch-size grids must be non-empty");
    }
    LoadedModel teacher = load_model_checkpoint(teacher_path);
    const auto stream_clips = load_manifest(manifest_path(stream_dir, "train"));
    const auto examples = make_examples(stream_clips, teacher.vocab, /*drop_oov=*/true);
    const auto eval_ori_clips = load_manifest(manifest_path(ori_dir, "eval"));
    const auto eval_new_clips = load_manifest(manifest_path(stream_dir, "eval"));

    std::vector<SweepCell> cells;
    cells.reserve(lambdas.size() * batch_sizes.size());
    for (int batch_size : batch_sizes) {
        for (double lambda : lambdas) {
            SweepCell cell;
            cell.batch_size = batch_size;
            cell.lambda = lambda;
            try {
                ContinualRunConfig cc = cfg.continual;
                cc.lambda = lambda;
                cc.batch_size = batch_size;
                cc.checkpoint_updates.clear();  // cells report the end state only
                cc.eval_at_end = true;
                Model student = clone_model(teacher.model);
                const ContinualRunResult result =
                    continual_run(teacher.model, student, examples, teacher.vocab,
                                  eval_ori_clips, eval_new_clips, cc);
                const CheckpointSnapshot& end = result.checkpoints.back();
                cell.spider_ori = end.eval_ori.spider;
                cell.spider_new = end.eval_new.spider;
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            cells.push_back(std::move(cell));
        }
    }

    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "results.csv").string(), sweep_results_csv(cells));
    write_json_file((fs::path(out_dir) / "results.json").string(),
                    sweep_results_json(cells, lambdas, batch_sizes));
    write_run_meta(out_dir, "sweep");
    return cells;
}

EvalReport cmd_evaluate(const std::string& checkpoint_path, const std::string& data_dir,
                        const std::string& split, const std::string& out_dir) {
    if (split != "train" && split != "val" && split != "eval") {
        throw ConfigError("--split must be one of train, val, eval; got '" + split + "'");
    }
    LoadedModel lm = load_model_checkpoint(checkpoint_path);
    const auto clips = load_manifest(manifest_path(data_dir, split));
    const EvalReport report =
        evaluate_dataset(lm.model, clips, lm.vocab, split, nullptr, lm.update_index);
    const json j = eval_report_to_json(report);
    validate_eval_report_json(j);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json_file((fs::path(out_dir) / "eval_report.json").string(), j);
        write_run_meta(out_dir, "evaluate");
    }
    return report;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Learning-without-forgetting workbench for audio captioning"};
    app.require_subcommand(1);

    std::string config_path, out, data, teacher, stream_data, ori_data, checkpoint;
    std::string split = "eval", lambdas_flag, batches_flag;
    uint64_t seed = 0;
    double lambda = 0.0;
    int batch_size = 0;
    bool force = false;

    CLI::App* s_synth = app.add_subcommand("synth", "Generate the synthetic dataset pair");
    CLI::App* s_pretrain = app.add_subcommand("pretrain", "Train the base model");
    CLI::App* s_continual =
        app.add_subcommand("continual", "Stream new data through a cloned teacher once");
    CLI::App* s_sweep = app.add_subcommand("sweep", "Grid of continual runs over lambda and B");
    CLI::App* s_evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");

    for (CLI::App* sub : {s_synth, s_pretrain, s_continual, s_sweep, s_evaluate}) {
        sub->add_option("--config", config_path, "Run config file (key = value lines)");
        sub->add_option("--seed", seed, "Seed override");
        sub->add_option("--out", out, "Output directory");
    }
    s_synth->add_flag("--force", force, "Overwrite a non-empty output directory");
    s_pretrain->add_option("--data", data, "Dataset directory (train.csv, val.csv, vocab.txt)");
    for (CLI::App* sub : {s_continual, s_sweep}) {
        sub->add_option("--teacher", teacher, "Teacher checkpoint file");
        sub->add_option("--stream-data", stream_data, "New-data dataset directory");
        sub->add_option("--ori-data", ori_data, "Original dataset directory");
    }
    s_continual->add_option("--lambda", lambda, "Distillation weight override");
    s_continual->add_option("--batch-size", batch_size, "Stream batch size override");
    s_sweep->add_option("--lambdas", lambdas_flag, "Comma-separated lambda grid");
    s_sweep->add_option("--batch-sizes", batches_flag, "Comma-separated batch-size grid");
    s_evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file");
    s_evaluate->add_option("--data", data, "Dataset directory");
    s_evaluate->add_option("--split", split, "Manifest split: train, val, or eval");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (sub->count("--seed") > 0) cfg.seed = seed;

        const auto pick = [](const std::string& flag_value, const std::string& cfg_value,
                             const char* what) {
            if (!flag_value.empty()) return flag_value;
            if (!cfg_value.empty()) return cfg_value;
            throw ConfigError(std::string("missing ") + what +
                              " (flag or the matching paths.* config key)");
        };

        if (sub == s_synth) {
            const std::string out_dir = pick(out, cfg.out_path, "--out");
            cmd_synth(cfg, out_dir, force);
            std::cout << "synth: wrote dataset trees 'ori' and 'new' under " << out_dir << "\n";
        } else if (sub == s_pretrain) {
            const std::string data_dir = pick(data, cfg.data_path, "--data");
            const std::string out_dir = pick(out, cfg.out_path, "--out");
            const PretrainResult result = cmd_pretrain(cfg, data_dir, out_dir);
            std::cout << "pretrain: " << result.epochs_run << " epochs, best epoch "
                      << result.best_epoch << " (val spider "
                      << format_double(result.best_val_spider) << "); wrote " << out_dir
                      << "/teacher.lwfc\n";
        } else if (sub == s_continual) {
            if (sub->count("--lambda") > 0) cfg.continual.lambda = lambda;
            if (sub->count("--batch-size") > 0) cfg.continual.batch_size = batch_size;
            const std::string teacher_path = pick(teacher, cfg.teacher_path, "--teacher");
            const std::string stream_dir = pick(stream_data, cfg.stream_path, "--stream-data");
            const std::string ori_dir = pick(ori_data, cfg.ori_path, "--ori-data");
            const std::string out_dir = pick(out, cfg.out_path, "--out");
            const ContinualRunResult result =
                cmd_continual(cfg, teacher_path, stream_dir, ori_dir, out_dir);
            std::cout << "continual: " << result.loss_trace.size() << " updates, "
                      << result.checkpoints.size() << " snapshots; wrote " << out_dir
                      << "/trace.json\n";
        } else if (sub == s_sweep) {
            const std::string teacher_path = pick(teacher, cfg.teacher_path, "--teacher");
            const std::string stream_dir = pick(stream_data, cfg.stream_path, "--stream-data");
            const std::string ori_dir = pick(ori_data, cfg.ori_path, "--ori-data");
            const std::string out_dir = pick(out, cfg.out_path, "--out");
            const std::vector<double> lambdas =
                lambdas_flag.empty() ? kDefaultSweepLambdas
                                     : parse_double_list_flag(lambdas_flag, "--lambdas");
            const std::vector<int> batch_sizes =
                batches_flag.empty() ? kDefaultSweepBatchSizes
                                     : parse_int_list_flag(batches_flag, "--batch-sizes");
            const std::vector<SweepCell> cells =
                cmd_sweep(cfg, teacher_path, stream_dir, ori_dir, lambdas, batch_sizes, out_dir);
            size_t failed = 0;
            for (const SweepCell& c : cells) failed += c.failed ? 1 : 0;
            std::cout << "sweep: " << cells.size() << " cells (" << failed << " failed); wrote "
                      << out_dir << "/results.csv\n";
        } else {
            const std::string checkpoint_path = pick(checkpoint, cfg.teacher_path, "--checkpoint");
            const std::string data_dir = pick(data, cfg.data_path, "--data");
            const EvalReport report = cmd_evaluate(checkpoint_path, data_dir, split, out);
            std::cout << eval_report_to_json(report).dump(2) << "\n";
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const VocabError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace lwf
