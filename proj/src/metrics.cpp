#include "lwf/metrics.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "lwf/error.hpp"

namespace lwf {

namespace {

constexpr double kLengthSigma = 6.0;
constexpr char kNGramSep = '\x1f';

struct ItemCounts {
    std::vector<std::string> cand_tokens;
    std::array<NGramCounts, kCiderMaxN> cand;
    std::vector<std::vector<std::string>> ref_tokens;
    std::vector<std::array<NGramCounts, kCiderMaxN>> refs;
};

double mean(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
}

}  // namespace

std::array<NGramCounts, kCiderMaxN> count_ngrams(const std::vector<std::string>& tokens) {
    std::array<NGramCounts, kCiderMaxN> out;
    for (int n = 1; n <= kCiderMaxN; ++n) {
        if (static_cast<int>(tokens.size()) < n) break;
        for (size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string key = tokens[i];
            for (int j = 1; j < n; ++j) {
                key += kNGramSep;
                key += tokens[i + j];
            }
            out[n - 1][key] += 1;
        }
    }
    return out;
}

double NGramStats::idf(int n, const std::string& gram) const {
    const auto& table = document_frequency.at(static_cast<size_t>(n - 1));
    auto it = table.find(gram);
    const int df = it == table.end() ? 0 : it->second;
    return std::log(static_cast<double>(corpus_size) / static_cast<double>(std::max(df, 1)));
}

NGramStats build_ngram_stats(
    const std::vector<std::vector<std::vector<std::string>>>& reference_tokens) {
    NGramStats stats;
    stats.corpus_size = reference_tokens.size();
    for (const auto& item_refs : reference_tokens) {
        std::array<std::map<std::string, bool>, kCiderMaxN> seen;
        for (const auto& ref : item_refs) {
            const auto grams = count_ngrams(ref);
            for (int n = 0; n < kCiderMaxN; ++n) {
                for (const auto& [gram, count] : grams[n]) seen[n][gram] = true;
            }
        }
        for (int n = 0; n < kCiderMaxN; ++n) {
            for (const auto& [gram, flag] : seen[n]) stats.document_frequency[n][gram] += 1;
        }
    }
    return stats;
}

CiderResult cider(const std::vector<std::string>& candidates,
                  const std::vector<std::vector<std::string>>& references) {
    if (candidates.size() != references.size()) {
        throw ShapeError("cider: " + std::to_string(candidates.size()) + " candidates vs " +
                         std::to_string(references.size()) + " reference lists");
    }
    if (candidates.empty()) throw DataError("cider: empty corpus");

    const size_t n_items = candidates.size();
    std::vector<ItemCounts> items(n_items);
    std::vector<std::vector<std::vector<std::string>>> reference_tokens(n_items);
    for (size_t i = 0; i < n_items; ++i) {
        if (references[i].empty()) {
            throw DataError("cider: item " + std::to_string(i) + " has no references");
        }
        items[i].cand_tokens = eval_tokenize(candidates[i]);
        items[i].cand = count_ngrams(items[i].cand_tokens);
        for (const std::string& ref : references[i]) {
            items[i].ref_tokens.push_back(eval_tokenize(ref));
            items[i].refs.push_back(count_ngrams(items[i].ref_tokens.back()));
            reference_tokens[i].push_back(items[i].ref_tokens.back());
        }
    }
    const NGramStats stats = build_ngram_stats(reference_tokens);

    CiderResult result;
    result.per_item.reserve(n_items);
    for (const ItemCounts& item : items) {
        std::array<double, kCiderMaxN> total{};
        const double lc = static_cast<double>(item.cand_tokens.size());
        for (size_t r = 0; r < item.refs.size(); ++r) {
            const double lr = static_cast<double>(item.ref_tokens[r].size());
            const double delta = lc - lr;
            const double penalty =
                std::exp(-(delta * delta) / (2.0 * kLengthSigma * kLengthSigma));
            for (int n = 0; n < kCiderMaxN; ++n) {
                double num = 0.0;
                double dot_hh = 0.0;
                for (const auto& [gram, count] : item.cand[n]) {
                    const double w = stats.idf(n + 1, gram);
                    const double h = static_cast<double>(count) * w;
                    auto it = item.refs[r][n].find(gram);
                    const double rv =
                        it == item.refs[r][n].end() ? 0.0 : static_cast<double>(it->second) * w;
                    num += std::min(h, rv) * rv;
                    dot_hh += h * h;
                }
                double dot_rr = 0.0;
                for (const auto& [gram, count] : item.refs[r][n]) {
                    const double rv = static_cast<double>(count) * stats.idf(n + 1, gram);
                    dot_rr += rv * rv;
                }
                if (dot_hh > 0.0 && dot_rr > 0.0) {
                    total[n] += penalty * num / std::sqrt(dot_hh * dot_rr);
                }
            }
        }
        const double across_n = total[0] + total[1] + total[2] + total[3];
        result.per_item.push_back(across_n / static_cast<double>(kCiderMaxN) /
                                  static_cast<double>(item.refs.size()) * 10.0);
    }
    result.corpus = mean(result.per_item);
    return result;
}

double unigram_f1(const std::string& candidate, const std::vector<std::string>& references) {
    std::map<std::string, int> cand;
    for (const std::string& tok : eval_tokenize(candidate)) cand[tok] += 1;
    // Multiset union of the references: per-word maximum count.
    std::map<std::string, int> ref_union;
    for (const std::string& ref : references) {
        std::map<std::string, int> counts;
        for (const std::string& tok : eval_tokenize(ref)) counts[tok] += 1;
        for (const auto& [tok, count] : counts) {
            ref_union[tok] = std::max(ref_union[tok], count);
        }
    }
    int n_cand = 0;
    int overlap = 0;
    for (const auto& [tok, count] : cand) {
        n_cand += count;
        auto it = ref_union.find(tok);
        if (it != ref_union.end()) overlap += std::min(count, it->second);
    }
    int n_ref = 0;
    for (const auto& [tok, count] : ref_union) n_ref += count;
    if (n_cand + n_ref == 0) return 1.0;  // both sides empty: vacuous match
    return 2.0 * static_cast<double>(overlap) / static_cast<double>(n_cand + n_ref);
}

double spice_stub(const std::vector<std::string>& candidates,
                  const std::vector<std::vector<std::string>>& references) {
    UnigramF1Proxy proxy;
    return mean(proxy.score(candidates, references));
}

std::vector<double> UnigramF1Proxy::score(const std::vector<std::string>& candidates,
                                          const std::vector<std::vector<std::string>>& references) {
    if (candidates.size() != references.size()) {
        throw ShapeError("spice proxy: " + std::to_string(candidates.size()) + " candidates vs " +
                         std::to_string(references.size()) + " reference lists");
    }
    std::vector<double> out;
    out.reserve(candidates.size());
    for (size_t i = 0; i < candidates.size(); ++i) {
        out.push_back(unigram_f1(candidates[i], references[i]));
    }
    return out;
}

namespace {

// Best-effort temporary file that removes itself on scope exit.
class TempFile {
public:
    explicit TempFile(const std::string& tag) {
        std::string templ = "/tmp/lwf_" + tag + "_XXXXXX";
        std::vector<char> buf(templ.begin(), templ.end());
        buf.push_back('\0');
        const int fd = ::mkstemp(buf.data());
        if (fd < 0) throw Error("failed to create temporary file for " + tag);
        ::close(fd);
        path_ = buf.data();
    }
    ~TempFile() { std::remove(path_.c_str()); }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

}  // namespace

ExternalProcessScorer::ExternalProcessScorer(std::string command) : command_(std::move(command)) {
    if (command_.empty()) throw ConfigError("external scorer command is empty");
}

std::vector<double> ExternalProcessScorer::score(
    const std::vector<std::string>& candidates,
    const std::vector<std::vector<std::string>>& references) {
    if (candidates.size() != references.size()) {
        throw ShapeError("external scorer: " + std::to_string(candidates.size()) +
                         " candidates vs " + std::to_string(references.size()) +
                         " reference lists");
    }
    TempFile in_file("spice_in");
    TempFile out_file("spice_out");
    {
        std::ofstream in(in_file.path());
        for (size_t i = 0; i < candidates.size(); ++i) {
            nlohmann::json line = {{"candidate", candidates[i]}, {"references", references[i]}};
            in << line.dump() << "\n";
        }
        if (!in) throw Error("failed to write scorer input " + in_file.path());
    }
    // Subshell so the redirections cover the whole command even when it
    // is itself a pipeline or a sequence.
    const std::string shell_cmd =
        "( " + command_ + " ) < " + in_file.path() + " > " + out_file.path();
    const int status = std::system(shell_cmd.c_str());
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw DataError("external scorer command failed: " + command_);
    }

    std::ifstream out(out_file.path());
    std::vector<double> scores;
    std::string line;
    while (std::getline(out, line)) {
        if (line.empty()) continue;
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError("external scorer output line " +
                              std::to_string(scores.size() + 1) + ": " + e.what());
        }
        double value = 0.0;
        if (parsed.is_number()) {
            value = parsed.get<double>();
        } else if (parsed.is_object() && parsed.contains("score") &&
                   parsed["score"].is_number()) {
            value = parsed["score"].get<double>();
        } else {
            throw FormatError("external scorer output line " +
                              std::to_string(scores.size() + 1) +
                              ": expected a number or {\"score\": x}");
        }
        if (!std::isfinite(value) || value < 0.0) {
            throw FormatError("external scorer returned an invalid score " +
                              std::to_string(value));
        }
        scores.push_back(value);
    }
    if (scores.size() != candidates.size()) {
        throw FormatError("external scorer returned " + std::to_string(scores.size()) +
                          " scores for " + std::to_string(candidates.size()) + " items");
    }
    return scores;
}

double spider(double cider_score, double spice_score) {
    return 0.5 * cider_score + 0.5 * spice_score;
}

EvalReport evaluate_dataset(const Model& model, const std::vector<CaptionedClip>& clips,
                            const Vocabulary& vocab, const std::string& dataset_label,
                            SpiceScorer* scorer, uint64_t update_index) {
    if (model.config().vocab_size != vocab.size()) {
        throw VocabError("evaluate: model expects " + std::to_string(model.config().vocab_size) +
                         " tokens but vocabulary has " + std::to_string(vocab.size()));
    }
    if (clips.empty()) throw DataError("evaluate: dataset is empty");

    // Greedy decoding is independent per clip; parallelize with stable
    // output positions. LWF_THREADS caps the worker count.
    size_t n_threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("LWF_THREADS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || parsed < 1) {
            throw ConfigError(std::string("LWF_THREADS must be a positive integer, got \"") +
                              env + "\"");
        }
        n_threads = std::min(n_threads, static_cast<size_t>(parsed));
    }
    n_threads = std::min(n_threads, clips.size());

    std::vector<std::string> candidates(clips.size());
    const int max_len = model.config().max_caption_len;
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= clips.size() || failed.load()) break;
            try {
                const std::vector<int> ids = model.generate_greedy(clips[i].features, max_len);
                candidates[i] = decode_tokens(ids, vocab);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) first_error = e.what();
                break;
            }
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (failed.load()) throw Error("evaluate: decoding failed: " + first_error);

    std::vector<std::vector<std::string>> references;
    references.reserve(clips.size());
    for (const CaptionedClip& clip : clips) references.push_back(clip.captions);

    EvalReport report;
    report.dataset_label = dataset_label;
    report.update_index = update_index;
    report.clip_ids.reserve(clips.size());
    for (const CaptionedClip& clip : clips) report.clip_ids.push_back(clip.clip_id);
    report.candidates = candidates;

    const CiderResult cider_scores = cider(candidates, references);
    UnigramF1Proxy proxy;
    SpiceScorer& spice_scorer = scorer ? *scorer : proxy;
    report.spice_impl = spice_scorer.impl_name();
    const std::vector<double> spice_scores = spice_scorer.score(candidates, references);
    if (spice_scores.size() != clips.size()) {
        throw ShapeError("spice scorer returned " + std::to_string(spice_scores.size()) +
                         " scores for " + std::to_string(clips.size()) + " items");
    }

    report.per_item_cider = cider_scores.per_item;
    report.per_item_spice = spice_scores;
    report.per_item_spider.reserve(clips.size());
    for (size_t i = 0; i < clips.size(); ++i) {
        report.per_item_spider.push_back(spider(cider_scores.per_item[i], spice_scores[i]));
    }
    report.cider = cider_scores.corpus;
    report.spice = mean(spice_scores);
    report.spider = spider(report.cider, report.spice);
    return report;
}

}  // namespace lwf
