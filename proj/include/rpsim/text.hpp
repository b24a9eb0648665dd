#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rpsim::text {

using TokenSet = std::set<std::string>;

/// Version tag of the shipped stopword list. Bump whenever the list changes,
/// since overlap scores (and therefore recorded traces) depend on it.
std::string_view stopwords_version();
const std::set<std::string, std::less<>>& stopwords();
bool is_stopword(std::string_view token);

/// Lowercased ASCII tokens in order. Apostrophes are dropped ("don't" ->
/// "dont"); every other non-alphanumeric byte separates tokens.
std::vector<std::string> tokenize(std::string_view text);

/// tokenize() minus stopwords, order preserved.
std::vector<std::string> content_tokens(std::string_view text);

TokenSet token_set(std::string_view text);

/// Tokens joined by single spaces.
std::string normalize(std::string_view text);

/// |a ∩ b| / |a ∪ b|; 0 when both are empty.
double jaccard(const TokenSet& a, const TokenSet& b);

/// Jaccard over normalized content-token sets.
double overlap_score(std::string_view a, std::string_view b);

/// Fraction of `needle`'s content tokens that also occur in `haystack`.
/// 0 when `needle` has no content tokens.
double containment(std::string_view needle, std::string_view haystack);

/// True when `text` carries at least `threshold` of `content`'s content tokens.
/// This is the single leak criterion used across the responder, the runtime
/// and the wire scans.
bool mentions_content(std::string_view text, std::string_view content, double threshold = 0.5);

/// Whole-token phrase match on normalized text.
bool contains_phrase(std::string_view text, std::string_view phrase);

/// Whitespace-delimited word count.
std::size_t word_count(std::string_view text);

/// Keeps the first `max_words` whitespace-delimited words.
std::string truncate_words(std::string_view text, std::size_t max_words);

}  // namespace rpsim::text
