#include "rpsim/text.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace rpsim::text {

namespace {

// rpsim-stopwords-v1. Order is irrelevant; membership is what matters.
const char* const kStopwords[] = {
    "a",       "about",  "above",  "after",  "again",   "against", "all",    "am",
    "an",      "and",    "any",    "are",    "as",      "at",      "be",     "because",
    "been",    "before", "being",  "below",  "between", "both",    "but",    "by",
    "can",     "could",  "did",    "do",     "does",    "doing",   "down",   "during",
    "each",    "few",    "for",    "from",   "further", "had",     "has",    "have",
    "having",  "he",     "her",    "here",   "hers",    "herself", "him",    "himself",
    "his",     "how",    "i",      "im",     "ive",     "if",      "in",     "into",
    "is",      "it",     "its",    "itself", "just",    "me",      "more",   "most",
    "my",      "myself", "no",     "nor",    "not",     "now",     "of",     "off",
    "on",      "once",   "only",   "or",     "other",   "our",     "ours",   "ourselves",
    "out",     "over",   "own",    "same",   "she",     "should",  "so",     "some",
    "such",    "than",   "that",   "thats",  "the",     "their",   "theirs", "them",
    "themselves", "then", "there", "these",  "they",    "this",    "those",  "through",
    "to",      "too",    "under",  "until",  "up",      "very",    "was",    "we",
    "were",    "what",   "when",   "where",  "which",   "while",   "who",    "whom",
    "why",     "will",   "with",   "would",  "you",     "your",    "youre",  "yours",
    "yourself", "yourselves", "s", "t", "ll", "re", "ve", "d", "m",
};

}  // namespace

std::string_view stopwords_version() { return "rpsim-stopwords-v1"; }

const std::set<std::string, std::less<>>& stopwords() {
    static const std::set<std::string, std::less<>> words(std::begin(kStopwords), std::end(kStopwords));
    return words;
}

bool is_stopword(std::string_view token) { return stopwords().contains(token); }

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char raw : text) {
        auto c = static_cast<unsigned char>(raw);
        if (c == '\'') continue;
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::vector<std::string> content_tokens(std::string_view text) {
    auto tokens = tokenize(text);
    std::erase_if(tokens, [](const std::string& t) { return is_stopword(t); });
    return tokens;
}

TokenSet token_set(std::string_view text) {
    auto tokens = content_tokens(text);
    return TokenSet(tokens.begin(), tokens.end());
}

std::string normalize(std::string_view text) {
    std::string out;
    for (const auto& t : tokenize(text)) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

double jaccard(const TokenSet& a, const TokenSet& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& t : a) common += b.count(t);
    const std::size_t uni = a.size() + b.size() - common;
    return static_cast<double>(common) / static_cast<double>(uni);
}

double overlap_score(std::string_view a, std::string_view b) { return jaccard(token_set(a), token_set(b)); }

double containment(std::string_view needle, std::string_view haystack) {
    const auto n = token_set(needle);
    if (n.empty()) return 0.0;
    const auto h = token_set(haystack);
    std::size_t common = 0;
    for (const auto& t : n) common += h.count(t);
    return static_cast<double>(common) / static_cast<double>(n.size());
}

bool mentions_content(std::string_view text, std::string_view content, double threshold) {
    if (token_set(content).empty()) return false;
    return containment(content, text) >= threshold;
}

bool contains_phrase(std::string_view text, std::string_view phrase) {
    const auto p = normalize(phrase);
    if (p.empty()) return false;
    const auto t = " " + normalize(text) + " ";
    return t.find(" " + p + " ") != std::string::npos;
}

std::size_t word_count(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

std::string truncate_words(std::string_view text, std::size_t max_words) {
    std::istringstream in{std::string(text)};
    std::string word, out;
    std::size_t n = 0;
    while (n < max_words && in >> word) {
        if (!out.empty()) out.push_back(' ');
        out += word;
        ++n;
    }
    return out;
}

}  // namespace rpsim::text
