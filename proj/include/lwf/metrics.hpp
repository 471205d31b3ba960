#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lwf/dataset.hpp"
#include "lwf/model.hpp"
#include "lwf/text.hpp"
#include "lwf/vocab.hpp"

namespace lwf {

// Metric-side tokenization; deliberately the same rule the vocabulary
// builder uses so training and scoring agree on word boundaries.
inline std::vector<std::string> eval_tokenize(const std::string& caption) {
    return tokenize_words(caption);
}

// Highest n-gram order used by the captioning metric.
inline constexpr int kCiderMaxN = 4;

// N-grams keyed by their tokens joined with '\x1f' (a byte the tokenizer
// never emits), mapped to occurrence counts.
using NGramCounts = std::map<std::string, int>;

// Multisets of 1..4-grams for one token sequence.
std::array<NGramCounts, kCiderMaxN> count_ngrams(const std::vector<std::string>& tokens);

// Corpus-level n-gram statistics: document frequencies counted over
// reference items (an item contributes 1 per distinct n-gram across all
// of its references).
struct NGramStats {
    std::array<NGramCounts, kCiderMaxN> document_frequency;
    size_t corpus_size = 0;

    // IDF = ln(corpus_size / max(df, 1)); n is 1-based.
    double idf(int n, const std::string& gram) const;
};

NGramStats build_ngram_stats(const std::vector<std::vector<std::vector<std::string>>>& reference_tokens);

struct CiderResult {
    double corpus = 0.0;
    std::vector<double> per_item;
};

// CIDEr-D: TF-IDF n-gram vectors (n = 1..4, IDF = ln(N / max(df, 1)) over
// reference items), clipped cosine per reference with a Gaussian length
// penalty (sigma = 6) applied per n, averaged over n and references,
// scaled by 10. Corpus score is the mean of per-item scores.
CiderResult cider(const std::vector<std::string>& candidates,
                  const std::vector<std::vector<std::string>>& references);

// Bag-of-unigrams F1 between the candidate and the multiset union
// (per-word max count) of the references.
double unigram_f1(const std::string& candidate, const std::vector<std::string>& references);

// Corpus-level stand-in for a semantic scorer: mean per-item unigram F1.
double spice_stub(const std::vector<std::string>& candidates,
                  const std::vector<std::vector<std::string>>& references);

// Pluggable semantic scorer slot. The built-in proxy is clearly labeled;
// an external command can supply real scores via line-delimited JSON.
class SpiceScorer {
public:
    virtual ~SpiceScorer() = default;
    virtual std::vector<double> score(const std::vector<std::string>& candidates,
                                      const std::vector<std::vector<std::string>>& references) = 0;
    virtual std::string impl_name() const = 0;
};

class UnigramF1Proxy final : public SpiceScorer {
public:
    std::vector<double> score(const std::vector<std::string>& candidates,
                              const std::vector<std::vector<std::string>>& references) override;
    std::string impl_name() const override { return "spice_proxy"; }
};

// Runs `command` once per evaluation via the shell. stdin receives one
// {"candidate": ..., "references": [...]} JSON object per line; stdout
// must return one score per line, either a bare number or {"score": x}.
class ExternalProcessScorer final : public SpiceScorer {
public:
    explicit ExternalProcessScorer(std::string command);
    std::vector<double> score(const std::vector<std::string>& candidates,
                              const std::vector<std::vector<std::string>>& references) override;
    std::string impl_name() const override { return "external:" + command_; }

private:
    std::string command_;
};

double spider(double cider_score, double spice_score);

struct EvalReport {
    double spider = 0.0;
    double cider = 0.0;
    double spice = 0.0;
    std::vector<double> per_item_spider;
    std::vector<double> per_item_cider;
    std::vector<double> per_item_spice;
    std::vector<std::string> clip_ids;
    std::vector<std::string> candidates;
    std::string dataset_label;
    std::string spice_impl;
    uint64_t update_index = 0;
};

// Greedy-decodes every clip, detokenizes, and scores against the clips'
// reference captions. Decoding parallelizes across clips, capped by the
// LWF_THREADS environment variable; results are position-stable.
EvalReport evaluate_dataset(const Model& model, const std::vector<CaptionedClip>& clips,
                            const Vocabulary& vocab, const std::string& dataset_label,
                            SpiceScorer* scorer = nullptr, uint64_t update_index = 0);

}  // namespace lwf
