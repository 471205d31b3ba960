#include "lwf/text.hpp"

#include <cctype>

namespace lwf {

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isspace(ch)) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else if (std::ispunct(ch)) {
            continue;  // stripped
        } else {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

}  // namespace lwf
