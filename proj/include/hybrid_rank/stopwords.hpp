#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hybrid_rank/util.hpp"

namespace hybrid_rank {

/// Bundled English stopword list; mirrors data/stopwords_en.txt line by line.
/// Entries containing apostrophes can never match a token produced by
/// `tokenize` and are kept only so the list stays identical to its source.
inline constexpr std::array<std::string_view, 179> english_stopwords = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his",
    "himself", "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself",
    "they", "them", "their", "theirs", "themselves", "what", "which", "who", "whom", "this",
    "that", "that'll", "these", "those", "am", "is", "are", "was", "were", "be", "been",
    "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
    "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
    "for", "with", "about", "against", "between", "into", "through", "during", "before",
    "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
    "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such",
    "no", "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t",
    "can", "will", "just", "don", "don't", "should", "should've", "now", "d", "ll", "m",
    "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn", "didn't",
    "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan",
    "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't",
    "wouldn", "wouldn't",
};

/// Pinned value of `stopword_hash(default_stopwords())`.
inline constexpr std::uint64_t english_stopwords_hash = 0x66cced87ab41e1faULL;

using StopwordSet = std::unordered_set<std::string>;

inline StopwordSet default_stopwords() {
    StopwordSet out;
    for (auto w : english_stopwords) {
        out.emplace(w);
    }
    return out;
}

/// FNV-1a over the words in byte order, each followed by a newline, so the
/// value does not depend on set iteration order.
inline std::uint64_t stopword_hash(const StopwordSet& words) {
    std::vector<std::string> sorted(words.begin(), words.end());
    std::sort(sorted.begin(), sorted.end());
    std::uint64_t h = fnv1a("");
    for (const auto& w : sorted) {
        h = fnv1a(w, h);
        h = fnv1a("\n", h);
    }
    return h;
}

}  // namespace hybrid_rank
