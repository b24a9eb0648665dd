#include <doctest.h>

#include "oracles.hpp"
#include "rpsim/text.hpp"

using namespace rpsim;

TEST_CASE("tokenizer lowercases and drops apostrophes") {
    const std::vector<std::string> want = {"i", "dont", "like", "pills", "10mg"};
    CHECK(text::tokenize("I don't like PILLS, 10mg!") == want);
    CHECK(text::tokenize("I don't like PILLS, 10mg!") == oracle::tokens("I don't like PILLS, 10mg!"));
    CHECK(text::tokenize("").empty());
}

TEST_CASE("jaccard identities") {
    CHECK(text::jaccard({"a", "b"}, {"a", "b"}) == 1.0);
    CHECK(text::jaccard({"a"}, {"b"}) == 0.0);
    CHECK(text::jaccard({}, {}) == 0.0);
    CHECK(text::jaccard({"cost", "insurance"}, {"insurance", "copay", "worry"}) == 0.25);
}

TEST_CASE("overlap ignores stopwords") {
    CHECK(text::overlap_score("the cost of insurance", "insurance cost") == 1.0);
    CHECK(text::overlap_score("and the of", "the and") == 0.0);
    CHECK(text::is_stopword("the"));
    CHECK_FALSE(text::is_stopword("insulin"));
    CHECK(text::stopwords_version() == "rpsim-stopwords-v1");
}

TEST_CASE("containment and mention threshold") {
    CHECK(text::containment("statins damage liver", "the liver and statins") == doctest::Approx(2.0 / 3.0));
    CHECK(text::containment("the and", "anything") == 0.0);
    CHECK(text::mentions_content("statins damage the liver", "Statins damage the liver permanently.", 0.5));
    CHECK_FALSE(text::mentions_content("my knee hurts", "Statins damage the liver permanently.", 0.5));
}

TEST_CASE("phrase matching is whole-token") {
    CHECK(text::contains_phrase("Tell me more about it", "tell me"));
    CHECK_FALSE(text::contains_phrase("Hotel meal", "tel me"));
    CHECK(text::contains_phrase("a b c", "b c"));
}

TEST_CASE("word counting and truncation") {
    CHECK(text::word_count("  one two\tthree\n") == 3);
    CHECK(text::truncate_words("one two three four", 2) == "one two");
    CHECK(text::truncate_words("one", 5) == "one");
    CHECK(text::normalize("Hello,   World!") == "hello world");
}
