#include "lwf/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "lwf/error.hpp"
#include "lwf/text.hpp"

namespace lwf {

const std::vector<std::string>& Vocabulary::reserved_tokens() {
    static const std::vector<std::string> names{"<pad>", "<sos>", "<eos>", "<unk>"};
    return names;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> sorted_words) {
    Vocabulary v;
    v.index_to_token_ = reserved_tokens();
    v.index_to_token_.insert(v.index_to_token_.end(),
                             std::make_move_iterator(sorted_words.begin()),
                             std::make_move_iterator(sorted_words.end()));
    for (int i = 0; i < static_cast<int>(v.index_to_token_.size()); ++i) {
        const auto& tok = v.index_to_token_[static_cast<size_t>(i)];
        auto [it, inserted] = v.token_to_index_.emplace(tok, i);
        (void)it;
        if (!inserted) throw DataError("vocabulary: duplicate token '" + tok + "'");
    }
    return v;
}

bool Vocabulary::contains(const std::string& token) const {
    return token_to_index_.count(token) > 0;
}

int Vocabulary::index_or_unk(const std::string& token) const {
    auto it = token_to_index_.find(token);
    return it == token_to_index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int index) const {
    if (index < 0 || index >= size()) {
        throw VocabError("vocabulary: index " + std::to_string(index) + " out of range [0, " +
                         std::to_string(size()) + ")");
    }
    return index_to_token_[static_cast<size_t>(index)];
}

Vocabulary build_vocabulary(const std::vector<std::string>& captions) {
    if (captions.empty()) throw DataError("build_vocabulary: empty caption corpus");
    std::set<std::string> words;
    for (const auto& c : captions) {
        for (auto& w : tokenize_words(c)) words.insert(std::move(w));
    }
    return Vocabulary::from_words({words.begin(), words.end()});
}

IntersectionReport intersect_vocabulary(const Vocabulary& v_new, const Vocabulary& v_ori) {
    IntersectionReport report;
    report.vocab = v_ori;
    const auto& toks = v_new.tokens();
    for (size_t i = Vocabulary::kNumReserved; i < toks.size(); ++i) {
        if (!v_ori.contains(toks[i])) report.removed_words.push_back(toks[i]);
    }
    return report;
}

std::vector<int> encode_caption(const std::string& caption, const Vocabulary& vocab,
                                bool drop_oov, EncodeStats* stats) {
    std::vector<int> ids{Vocabulary::kSos};
    int dropped = 0;
    for (const auto& w : tokenize_words(caption)) {
        if (vocab.contains(w)) {
            ids.push_back(vocab.index_or_unk(w));
        } else if (drop_oov) {
            ++dropped;
        } else {
            ids.push_back(Vocabulary::kUnk);
        }
    }
    ids.push_back(Vocabulary::kEos);
    if (stats) {
        stats->dropped_words += dropped;
        stats->empty_after_drop = stats->empty_after_drop || ids.size() == 2;
    }
    return ids;
}

std::string decode_tokens(const std::vector<int>& ids, const Vocabulary& vocab) {
    std::vector<std::string> words;
    for (int id : ids) {
        if (id == Vocabulary::kEos) break;
        if (id < Vocabulary::kNumReserved) continue;
        words.push_back(vocab.token(id));
    }
    return join_words(words);
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open vocabulary file for writing: " + path);
    for (const auto& tok : vocab.tokens()) out << tok << '\n';
    if (!out) throw DataError("failed writing vocabulary file: " + path);
}

Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open vocabulary file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    const auto& reserved = Vocabulary::reserved_tokens();
    if (lines.size() < reserved.size()) {
        throw FormatError("vocabulary file too short: " + path);
    }
    for (size_t i = 0; i < reserved.size(); ++i) {
        if (lines[i] != reserved[i]) {
            throw FormatError("vocabulary file line " + std::to_string(i + 1) + ": expected '" +
                              reserved[i] + "', found '" + lines[i] + "'");
        }
    }
    std::vector<std::string> words(lines.begin() + static_cast<long>(reserved.size()),
                                   lines.end());
    for (size_t i = 1; i < words.size(); ++i) {
        if (!(words[i - 1] < words[i])) {
            throw FormatError("vocabulary file: content words out of order at line " +
                              std::to_string(reserved.size() + i + 1));
        }
    }
    return Vocabulary::from_words(std::move(words));
}

}  // namespace lwf
