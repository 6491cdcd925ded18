#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include "sensegram/corpus.hpp"
#include "sensegram/error.hpp"
#include "support.hpp"

using namespace sensegram;
using sensegram::testing::TempDir;

namespace {

std::vector<std::string> toks(std::initializer_list<const char*> xs) { return {xs.begin(), xs.end()}; }

std::vector<WordId> ids_of(const Vocab& v, std::initializer_list<const char*> xs) {
    std::vector<WordId> out;
    for (auto x : xs) out.push_back(*v.find(x));
    return out;
}

}  // namespace

TEST_CASE("token validity") {
    CHECK(is_valid_token("dricka-verb"));
    CHECK_FALSE(is_valid_token(""));
    CHECK_FALSE(is_valid_token("a b"));
    CHECK_FALSE(is_valid_token("a\tb"));
    CHECK_FALSE(is_valid_token("a\n"));
}

TEST_CASE("build_vocab counts and orders") {
    auto v = build_vocab(toks({"a", "b", "a"}), 1);
    REQUIRE(v.size() == 2);
    CHECK(v.token(0) == "a");
    CHECK(v.count(0) == 2);
    CHECK(v.token(1) == "b");
    CHECK(v.count(1) == 1);
    CHECK(v.total_tokens() == 3);
    CHECK(*v.find("b") == 1);
    CHECK_FALSE(v.find("c"));

    auto pruned = build_vocab(toks({"a", "b", "a"}), 2);
    REQUIRE(pruned.size() == 1);
    CHECK(pruned.token(0) == "a");
    CHECK(pruned.total_tokens() == 2);
}

TEST_CASE("build_vocab ties are lexicographic") {
    auto v = build_vocab(toks({"zeta", "alpha", "mid", "mid"}), 1);
    CHECK(v.token(0) == "mid");
    CHECK(v.token(1) == "alpha");
    CHECK(v.token(2) == "zeta");
}

TEST_CASE("build_vocab errors") {
    std::vector<std::string> none;
    CHECK_THROWS_WITH_AS(build_vocab(none, 1), "empty corpus", DataError);
    CHECK_THROWS_WITH_AS(build_vocab(toks({"a", "b"}), 5), "vocabulary empty after pruning", DataError);
    CHECK_THROWS_WITH_AS(build_vocab_from_text("  \n\n", 1), "empty corpus", DataError);
}

TEST_CASE("build_vocab matches an independent recount on a Zipfian stream") {
    Rng rng(7);
    std::vector<double> cdf(50);
    double acc = 0;
    for (std::size_t r = 0; r < 50; ++r) cdf[r] = acc += 1.0 / static_cast<double>(r + 1);
    std::vector<std::string> stream;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform() * acc;
        const auto r = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        stream.push_back("w" + std::to_string(std::min<std::size_t>(r, 49)));
    }
    const auto vocab = build_vocab(stream, 5);

    std::map<std::string, std::uint64_t> recount;
    for (const auto& t : stream) recount[t] += 1;
    std::vector<std::pair<std::uint64_t, std::string>> expected;
    for (const auto& [t, c] : recount)
        if (c >= 5) expected.emplace_back(c, t);
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    REQUIRE(vocab.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(vocab.token(static_cast<WordId>(i)) == expected[i].second);
        CHECK(vocab.count(static_cast<WordId>(i)) == expected[i].first);
    }

    SUBCASE("deterministic and order independent") {
        auto shuffled = stream;
        std::reverse(shuffled.begin(), shuffled.end());
        CHECK(build_vocab(stream, 5) == vocab);
        CHECK(build_vocab(shuffled, 5) == vocab);
    }
}

TEST_CASE("vocab file round trip and header") {
    TempDir dir;
    auto v = build_vocab(toks({"b", "a", "a", "c"}), 1);
    v.save(dir / "v.tsv");
    std::ifstream in(dir / "v.tsv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "SENSEGRAM-VOCAB v1 total=4");
    CHECK(Vocab::load(dir / "v.tsv") == v);

    std::ofstream(dir / "bad.tsv") << "SENSEGRAM-VOCAB v1 total=9\na\t2\n";
    CHECK_THROWS_AS(Vocab::load(dir / "bad.tsv"), DataError);
    std::ofstream(dir / "order.tsv") << "SENSEGRAM-VOCAB v1 total=3\na\t1\nb\t2\n";
    CHECK_THROWS_AS(Vocab::load(dir / "order.tsv"), DataError);
    std::ofstream(dir / "nohdr.tsv") << "a\t1\n";
    CHECK_THROWS_AS(Vocab::load(dir / "nohdr.tsv"), DataError);
}

TEST_CASE("iter_windows enumerates fixed windows") {
    auto vocab = build_vocab(toks({"a", "b", "c"}), 1);
    Rng rng(1);
    auto ex = iter_windows(toks({"a", "b", "c"}), vocab, {1, false}, rng);
    REQUIRE(ex.size() == 3);
    CHECK(ex[0].target == *vocab.find("a"));
    CHECK(ex[0].contexts == ids_of(vocab, {"b"}));
    CHECK(ex[1].contexts == ids_of(vocab, {"a", "c"}));
    CHECK(ex[2].contexts == ids_of(vocab, {"b"}));
}

TEST_CASE("iter_windows drops OOV tokens before windowing") {
    auto vocab = build_vocab(toks({"a", "b"}), 1);
    Rng rng(1);
    auto ex = iter_windows(toks({"a", "x", "b"}), vocab, {1, false}, rng);
    REQUIRE(ex.size() == 2);
    CHECK(ex[0].target == *vocab.find("a"));
    CHECK(ex[0].contexts == ids_of(vocab, {"b"}));
    CHECK(ex[1].target == *vocab.find("b"));
    CHECK(ex[1].contexts == ids_of(vocab, {"a"}));
}

TEST_CASE("single-token sentences produce no examples") {
    auto vocab = build_vocab(toks({"a"}), 1);
    Rng rng(1);
    CHECK(iter_windows(toks({"a"}), vocab, {3, false}, rng).empty());
}

TEST_CASE("fixed windows emit the exact neighbour count") {
    Rng gen(3);
    std::vector<std::string> corpus;
    for (int i = 0; i < 1000; ++i) corpus.push_back("w" + std::to_string(gen.below(40)));
    auto vocab = build_vocab(corpus, 1);
    for (std::size_t w : {1u, 3u, 10u}) {
        Rng rng(1);
        auto ex = iter_windows(corpus, vocab, {w, false}, rng);
        std::size_t pairs = 0;
        for (const auto& e : ex) {
            pairs += e.contexts.size();
            CHECK(e.contexts.size() <= 2 * w);
        }
        std::size_t expected = 0;
        const std::size_t n = corpus.size();
        for (std::size_t p = 0; p < n; ++p) expected += std::min(w, p) + std::min(w, n - 1 - p);
        CHECK(pairs == expected);
        CHECK(ex.size() == n);
    }
}

TEST_CASE("dynamic windows match an independent replay") {
    Rng gen(11);
    std::vector<std::string> corpus;
    for (int i = 0; i < 1000; ++i) corpus.push_back("w" + std::to_string(gen.below(60)));
    auto vocab = build_vocab(corpus, 1);
    Rng rng(2024);
    auto ex = iter_windows(corpus, vocab, {5, true}, rng);
    std::size_t pairs = 0;
    for (const auto& e : ex) pairs += e.contexts.size();

    Rng replay(2024);
    std::size_t expected = 0;
    const std::size_t n = corpus.size();
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t eff = static_cast<std::size_t>(replay.below(5)) + 1;
        expected += std::min(eff, p) + std::min(eff, n - 1 - p);
    }
    CHECK(pairs == expected);
    CHECK(pairs < 1000 * 10);
}

TEST_CASE("window never pairs a position with itself") {
    std::vector<std::string> corpus;
    for (int i = 0; i < 30; ++i) corpus.push_back("u" + std::to_string(i));
    auto vocab = build_vocab(corpus, 1);
    Rng rng(5);
    for (const auto& e : iter_windows(corpus, vocab, {4, true}, rng))
        CHECK(std::find(e.contexts.begin(), e.contexts.end(), e.target) == e.contexts.end());

    // A repeated type elsewhere in the window is a legitimate context.
    auto rep = build_vocab(toks({"a", "a"}), 1);
    auto ex = iter_windows(toks({"a", "a"}), rep, {1, false}, rng);
    REQUIRE(ex.size() == 2);
    CHECK(ex[0].contexts == std::vector<WordId>{0});
}

TEST_CASE("sentence boundaries reset the window") {
    const std::string text = "a b\nc d\n\n";
    auto vocab = build_vocab_from_text(text, 1);
    auto corpus = encode_text(text, vocab);
    CHECK(corpus.sentence_count() == 2);
    CHECK(corpus.raw_tokens == 4);
    Rng rng(1);
    for (const auto& e : iter_windows(corpus, {5, false}, rng)) CHECK(e.contexts.size() == 1);

    CorpusOptions opts{"</s>"};
    const std::string flat = "a b </s> c d";
    auto v2 = build_vocab_from_text(flat, 1, opts);
    CHECK_FALSE(v2.find("</s>"));
    auto c2 = encode_text(flat, v2, opts);
    CHECK(c2.sentence_count() == 2);
}

TEST_CASE("shards are contiguous and line aligned") {
    std::string text;
    for (int i = 0; i < 100; ++i) text += "a b c\n";
    auto vocab = build_vocab_from_text(text, 1);
    auto corpus = encode_text(text, vocab);
    for (std::size_t parts : {1u, 3u, 4u, 7u}) {
        auto b = shard_sentences(corpus, text.size(), parts);
        REQUIRE(b.size() == parts + 1);
        CHECK(b.front() == 0);
        CHECK(b.back() == corpus.sentence_count());
        CHECK(std::is_sorted(b.begin(), b.end()));
    }
    auto four = shard_sentences(corpus, text.size(), 4);
    CHECK(four[1] == 25);
    CHECK(four[2] == 50);
}

TEST_CASE("subsampling") {
    Vocab vocab({{"b", 3}, {"a", 1}});
    const WordId a = *vocab.find("a");
    const WordId b = *vocab.find("b");
    std::vector<WordId> stream = {a, b, b, a, b};

    SUBCASE("disabled returns the stream unchanged") {
        Rng rng(1);
        const auto before = rng;
        CHECK(subsample_filter(stream, vocab, 0.0, rng) == stream);
        Rng untouched = before;
        CHECK(rng.next() == untouched.next());
    }
    SUBCASE("closed form") {
        CHECK(discard_probability(0.01, 0.01) == 0.0);
        CHECK(discard_probability(0.001, 0.01) == 0.0);
        CHECK(discard_probability(0.04, 0.01) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(discard_probability(0.5, 0.0) == 0.0);
    }
    SUBCASE("Monte-Carlo discard rate at f = 4t") {
        // f(a) = 1/4, so t = 1/16 gives discard probability 1/2.
        std::vector<WordId> many(100000, a);
        Rng rng(99);
        const auto kept = subsample_filter(many, vocab, 1.0 / 16.0, rng);
        const double rate = 1.0 - static_cast<double>(kept.size()) / static_cast<double>(many.size());
        CHECK(std::abs(rate - 0.5) <= 0.02);
    }
    SUBCASE("negative threshold rejected") {
        Rng rng(1);
        CHECK_THROWS_AS(subsample_filter(stream, vocab, -1.0, rng), UsageError);
    }
}
