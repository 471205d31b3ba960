#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace lwf {

// Token inventory with four fixed control slots ahead of the content
// words. Content words occupy contiguous indices 4..W-1 and are sorted
// lexicographically, so construction is deterministic.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kSos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;
    static constexpr int kNumReserved = 4;

    static const std::vector<std::string>& reserved_tokens();

    // Builds from sorted unique content words (no reserved names allowed).
    static Vocabulary from_words(std::vector<std::string> sorted_words);

    int size() const { return static_cast<int>(index_to_token_.size()); }
    bool contains(const std::string& token) const;
    // Index of a content token, or kUnk when absent.
    int index_or_unk(const std::string& token) const;
    const std::string& token(int index) const;  // throws on out-of-range
    const std::vector<std::string>& tokens() const { return index_to_token_; }

    bool operator==(const Vocabulary& other) const {
        return index_to_token_ == other.index_to_token_;
    }

private:
    std::vector<std::string> index_to_token_;
    std::unordered_map<std::string, int> token_to_index_;
};

// Tokenizes every caption and assembles the vocabulary; empty caption
// list is a data error.
Vocabulary build_vocabulary(const std::vector<std::string>& captions);

struct IntersectionReport {
    Vocabulary vocab;                        // the working vocabulary (== v_ori)
    std::vector<std::string> removed_words;  // v_new content words absent from v_ori
};

// The continual phase keeps the original vocabulary; words unique to the
// new data are reported and later dropped during encoding.
IntersectionReport intersect_vocabulary(const Vocabulary& v_new, const Vocabulary& v_ori);

struct EncodeStats {
    int dropped_words = 0;
    bool empty_after_drop = false;
};

// start token + content ids + end token. Out-of-vocabulary words are
// deleted when drop_oov is set (the stream setting) and mapped to the
// unknown token otherwise.
std::vector<int> encode_caption(const std::string& caption, const Vocabulary& vocab,
                                bool drop_oov, EncodeStats* stats = nullptr);

// Content words of a token sequence joined with spaces; stops at the end
// token and skips all reserved ids.
std::string decode_tokens(const std::vector<int>& ids, const Vocabulary& vocab);

// One token per line, line number == index; the four reserved names come
// first and are validated on load.
void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

}  // namespace lwf
