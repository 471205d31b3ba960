#pragma once

#include <string>
#include <vector>

namespace lwf {

// Canonical word tokenization used for vocabulary building, caption
// encoding, and metric evaluation alike: lowercase ASCII letters,
// strip punctuation, split on whitespace.
std::vector<std::string> tokenize_words(const std::string& text);

// Tokens joined with single spaces (the normalized caption form).
std::string join_words(const std::vector<std::string>& words);

}  // namespace lwf
