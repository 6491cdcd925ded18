#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "sensegram/error.hpp"
#include "sensegram/eval.hpp"
#include "sensegram/trainer.hpp"
#include "oracles.hpp"

using namespace sensegram;

namespace {

struct SmallCorpus {
    std::string text;
    Vocab vocab;
    EncodedCorpus corpus;
};

SmallCorpus two_topic_corpus(std::uint64_t tokens, std::uint64_t seed) {
    SynthSpec spec;
    spec.topics = {{60, 1.0, 1.0}, {60, 1.0, 1.0}};
    spec.tokens = tokens;
    spec.pseudowords = {{"pw-nn", {"t0w3-nn", "t1w3-nn"}}};
    spec.seed = seed;
    SmallCorpus c;
    c.text = generate_corpus(spec).text();
    c.vocab = build_vocab_from_text(c.text, 1);
    c.corpus = encode_text(c.text, c.vocab);
    return c;
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.dim = 16;
    cfg.window = 3;
    cfg.epochs = 2;
    cfg.min_count = 1;
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    auto bad = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), UsageError);
    };
    bad([](TrainConfig& c) { c.window = 0; });
    bad([](TrainConfig& c) { c.dim = 0; });
    bad([](TrainConfig& c) { c.alpha = 0; });
    bad([](TrainConfig& c) { c.alpha = std::nan(""); });
    bad([](TrainConfig& c) { c.epochs = 0; });
    bad([](TrainConfig& c) { c.workers = 0; });
    bad([](TrainConfig& c) { c.subsample = -1; });
    bad([](TrainConfig& c) { c.max_k = 0; });
    CHECK(cfg.effective_min_alpha() == doctest::Approx(2.5e-6));
}

TEST_CASE("lr_schedule") {
    TrainConfig cfg;
    cfg.alpha = 0.025;
    cfg.min_alpha = 2.5e-6;
    CHECK(lr_schedule(0.0, cfg) == 0.025);
    CHECK(lr_schedule(1.0, cfg) == 2.5e-6);
    CHECK(lr_schedule(0.5, cfg) == doctest::Approx(0.0125).epsilon(1e-15));
    double prev = lr_schedule(0.0, cfg);
    for (int i = 1; i <= 100; ++i) {
        const double a = lr_schedule(i / 100.0, cfg);
        CHECK(a <= prev);
        prev = a;
    }
}

TEST_CASE("noise table") {
    SUBCASE("single word") {
        NoiseTable t(Vocab({{"a", 3}}), 0.75);
        Rng rng(1);
        for (int i = 0; i < 100; ++i) CHECK(t.sample(rng) == 0);
        CHECK(t.probability(0) == 1.0);
    }
    SUBCASE("count 16 vs 1 at power 0.75") {
        NoiseTable t(Vocab({{"a", 16}, {"b", 1}}), 0.75);
        CHECK(t.probability(0) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
        Rng rng(2);
        const int draws = 1000000;
        int a = 0;
        for (int i = 0; i < draws; ++i) a += t.sample(rng) == 0;
        CHECK(std::abs(a / double(draws) - 8.0 / 9.0) < 0.005);
    }
    SUBCASE("power 0 is uniform") {
        NoiseTable t(Vocab({{"a", 1000}, {"b", 10}, {"c", 1}}), 0.0);
        for (WordId w = 0; w < 3; ++w) CHECK(t.probability(w) == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("chi-square against count^0.75 on a Zipf vocabulary") {
        std::vector<VocabEntry> e;
        for (int r = 1; r <= 20; ++r) e.push_back({"w" + std::to_string(100 + r), static_cast<std::uint64_t>(2000 / r)});
        Vocab v(e);
        NoiseTable t(v, 0.75);
        double z = 0;
        for (const auto& x : e) z += std::pow(double(x.count), 0.75);
        std::vector<int> hits(20, 0);
        Rng rng(3);
        const int draws = 200000;
        for (int i = 0; i < draws; ++i) ++hits[t.sample(rng)];
        double chi2 = 0;
        for (int i = 0; i < 20; ++i) {
            const double p = std::pow(double(e[i].count), 0.75) / z;
            CHECK(t.probability(i) == doctest::Approx(p).epsilon(1e-12));
            chi2 += (hits[i] - draws * p) * (hits[i] - draws * p) / (draws * p);
        }
        // 19 degrees of freedom, p = 0.001.
        CHECK(chi2 < 43.82);
    }
}

TEST_CASE("negatives avoid the context word") {
    Vocab v({{"a", 100}, {"b", 1}});
    NoiseTable t(v, 0.75);
    Rng rng(4);
    std::vector<WordId> out;
    std::size_t total = 0;
    for (int i = 0; i < 2000; ++i) {
        draw_negatives(t, 0, 5, rng, out);
        CHECK(out.size() <= 5);
        for (WordId w : out) CHECK(w == 1);
        total += out.size();
    }
    CHECK(total > 0);
    NoiseTable only(Vocab({{"a", 1}}), 0.75);
    draw_negatives(only, 0, 5, rng, out);
    CHECK(out.empty());
}

TEST_CASE("sgns coefficient at a zero dot product") {
    BasicEmbeddings<double> m;
    m.dim = 2;
    m.context = {1.0, 0.0};
    m.sense = {0.0, 1.0};
    std::vector<double> grad(2);
    sgns_apply<double>(m, 0, 0, {}, 0.1, grad);
    // g = 0.1 * (1 - 0.5) = 0.05
    CHECK(grad[0] == 0.05);
    CHECK(grad[1] == 0.0);
    CHECK(m.sense == std::vector<double>{0.05, 1.0});
    CHECK(m.context == std::vector<double>{1.0, 0.05});
}

TEST_CASE("no negatives means only the positive pair moves") {
    Rng rng(5);
    BasicEmbeddings<double> m;
    m.dim = 4;
    for (int i = 0; i < 12; ++i) m.context.push_back(rng.uniform() - 0.5);
    for (int i = 0; i < 4; ++i) m.sense.push_back(rng.uniform() - 0.5);
    const auto before = m.context;
    std::vector<double> grad(4);
    sgns_apply<double>(m, 0, 1, {}, 0.05, grad);
    for (int j = 0; j < 4; ++j) {
        CHECK(m.context[j] == before[j]);
        CHECK(m.context[8 + j] == before[8 + j]);
    }
    CHECK(m.context[4] != before[4]);
}

TEST_CASE("sgns update matches central finite differences") {
    Rng rng(6);
    const double eps = 1e-4;
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t dim = trial == 0 ? 3 : 2 + rng.below(9);
        const std::size_t negs = trial == 0 ? 2 : rng.below(6);
        const double alpha = trial == 0 ? 0.01 : 0.001 + 0.05 * rng.uniform();
        const std::size_t words = negs + 1;
        BasicEmbeddings<double> m;
        m.dim = dim;
        for (std::size_t i = 0; i < words * dim; ++i) m.context.push_back((rng.uniform() - 0.5) * 2);
        for (std::size_t i = 0; i < dim; ++i) m.sense.push_back((rng.uniform() - 0.5) * 2);
        std::vector<std::vector<double>> rows(words);
        for (std::size_t w = 0; w < words; ++w) rows[w].assign(m.context.begin() + w * dim, m.context.begin() + (w + 1) * dim);
        const auto s0 = m.sense;
        std::vector<WordId> negatives;
        for (std::size_t n = 1; n <= negs; ++n) negatives.push_back(static_cast<WordId>(n));

        auto m2 = m;
        std::vector<double> grad(dim);
        const double reported = sgns_apply<double>(m2, 0, 0, negatives, alpha, grad);
        CHECK(reported == doctest::Approx(oracle::ns_loss(s0, rows)).epsilon(1e-12));

        auto check = [&](double analytic_step, double numeric_grad) {
            const double expected = -alpha * numeric_grad;
            const double scale = std::max(std::abs(expected), 1e-8);
            const double rel = std::abs(analytic_step - expected) / scale;
            worst = std::max(worst, rel);
            CHECK(rel < 1e-4);
        };
        for (std::size_t j = 0; j < dim; ++j) {
            auto plus = s0, minus = s0;
            plus[j] += eps;
            minus[j] -= eps;
            check(m2.sense[j] - s0[j], (oracle::ns_loss(plus, rows) - oracle::ns_loss(minus, rows)) / (2 * eps));
        }
        for (std::size_t w = 0; w < words; ++w) {
            for (std::size_t j = 0; j < dim; ++j) {
                auto plus = rows, minus = rows;
                plus[w][j] += eps;
                minus[w][j] -= eps;
                check(m2.context[w * dim + j] - rows[w][j], (oracle::ns_loss(s0, plus) - oracle::ns_loss(s0, minus)) / (2 * eps));
            }
        }
    }
    MESSAGE("worst relative error " << worst);
}

TEST_CASE("monosemic inventory reproduces plain skip-gram exactly") {
    auto c = two_topic_corpus(20000, 11);
    auto cfg = small_config();
    auto inv = SenseInventory::monosemic(c.vocab);
    auto senses = train(c.corpus, c.text.size(), c.vocab, inv, cfg);
    auto plain = train_skipgram(c.corpus, c.text.size(), c.vocab, cfg);
    REQUIRE(senses.matrices.sense.size() == plain.matrices.sense.size());
    CHECK(std::memcmp(senses.matrices.sense.data(), plain.matrices.sense.data(), plain.matrices.sense.size() * 4) == 0);
    CHECK(std::memcmp(senses.matrices.context.data(), plain.matrices.context.data(), plain.matrices.context.size() * 4) ==
          0);
    CHECK(senses.stats.tie_breaks == 0);
}

TEST_CASE("single-worker training is reproducible and finite") {
    auto c = two_topic_corpus(20000, 12);
    auto cfg = small_config();
    SenseCounts counts;
    counts.counts["pw-nn"] = 2;
    auto inv = build_sense_inventory(c.vocab, counts);
    auto a = train(c.corpus, c.text.size(), c.vocab, inv, cfg);
    auto b = train(c.corpus, c.text.size(), c.vocab, inv, cfg);
    CHECK(a.matrices.sense == b.matrices.sense);
    CHECK(a.matrices.context == b.matrices.context);
    CHECK(all_finite(a.matrices));
    CHECK(a.stats.mean_loss() > 0);
    CHECK(a.stats.words_processed == c.corpus.ids.size() * cfg.epochs);

    cfg.seed = 8;
    auto other = train(c.corpus, c.text.size(), c.vocab, inv, cfg);
    CHECK(other.matrices.sense != a.matrices.sense);
}

TEST_CASE("every occurrence trains exactly one sense") {
    auto c = two_topic_corpus(30000, 13);
    auto cfg = small_config();
    cfg.dynamic_window = false;
    SenseCounts counts;
    counts.counts["pw-nn"] = 3;
    counts.counts["t0w1-nn"] = 2;
    auto inv = build_sense_inventory(c.vocab, counts);
    auto r = train(c.corpus, c.text.size(), c.vocab, inv, cfg);

    // Recount from the raw text: an occurrence is trained when its sentence has another token.
    std::map<std::string, std::uint64_t> expected;
    std::size_t start = 0;
    while (start < c.text.size()) {
        auto end = c.text.find('\n', start);
        if (end == std::string::npos) end = c.text.size();
        auto toks = testing::split_ws(c.text.substr(start, end - start));
        if (toks.size() > 1)
            for (const auto& t : toks) ++expected[t];
        start = end + 1;
    }
    for (const char* word : {"pw-nn", "t0w1-nn"}) {
        const auto id = *c.vocab.find(word);
        const auto& block = inv.block(id);
        std::uint64_t sum = 0;
        for (std::uint32_t k = 0; k < block.k; ++k) sum += r.stats.sense_occurrences[block.first + k];
        CHECK(sum == expected[word] * cfg.epochs);
    }
    std::uint64_t by_index = 0;
    for (auto x : r.stats.updates_by_index) by_index += x;
    CHECK(by_index == (expected["pw-nn"] + expected["t0w1-nn"]) * cfg.epochs);

    // Context rows start at zero, so the very first posterior is a tie.
    const std::string tiny = "p a\n";
    auto tv = build_vocab_from_text(tiny, 1);
    SenseCounts tc;
    tc.counts["p"] = 2;
    auto first = train(encode_text(tiny, tv), tiny.size(), tv, build_sense_inventory(tv, tc), cfg);
    CHECK(first.stats.tie_breaks >= 1);
}

TEST_CASE("multi-worker training stays finite and counts every word") {
    auto c = two_topic_corpus(30000, 14);
    auto cfg = small_config();
    cfg.workers = 3;
    SenseCounts counts;
    counts.counts["pw-nn"] = 2;
    auto inv = build_sense_inventory(c.vocab, counts);
    auto r = train(c.corpus, c.text.size(), c.vocab, inv, cfg);
    CHECK(all_finite(r.matrices));
    CHECK(r.stats.words_processed == c.corpus.ids.size() * cfg.epochs);
}

TEST_CASE("subsampling drops frequent words") {
    auto c = two_topic_corpus(20000, 15);
    auto cfg = small_config();
    auto inv = SenseInventory::monosemic(c.vocab);
    auto full = train(c.corpus, c.text.size(), c.vocab, inv, cfg);
    cfg.subsample = 1e-3;
    auto thin = train(c.corpus, c.text.size(), c.vocab, inv, cfg);
    CHECK(thin.stats.examples < full.stats.examples);
    CHECK(all_finite(thin.matrices));
}

TEST_CASE("training from a file and mismatched inventories") {
    testing::TempDir dir;
    auto c = two_topic_corpus(5000, 16);
    {
        std::ofstream f(dir / "c.txt", std::ios::binary);
        f << c.text;
    }
    auto cfg = small_config();
    auto inv = SenseInventory::monosemic(c.vocab);
    auto from_file = train(dir / "c.txt", c.vocab, inv, cfg);
    auto in_memory = train(c.corpus, c.text.size(), c.vocab, inv, cfg);
    CHECK(from_file.matrices.sense == in_memory.matrices.sense);
    CHECK_THROWS_AS(train(dir / "missing.txt", c.vocab, inv, cfg), DataError);
    auto other = SenseInventory::monosemic(Vocab({{"a", 1}}));
    CHECK_THROWS_AS(train(c.corpus, c.text.size(), c.vocab, other, cfg), UsageError);
}

TEST_CASE("progress callback reports decaying alpha") {
    auto c = two_topic_corpus(60000, 17);
    auto cfg = small_config();
    std::vector<ProgressInfo> seen;
    train(c.corpus, c.text.size(), c.vocab, SenseInventory::monosemic(c.vocab), cfg,
          [&](const ProgressInfo& p) { seen.push_back(p); }, 0.0);
    REQUIRE(seen.size() >= 2);
    for (std::size_t i = 1; i < seen.size(); ++i) {
        CHECK(seen[i].progress >= seen[i - 1].progress);
        CHECK(seen[i].alpha <= seen[i - 1].alpha);
    }
    CHECK(seen.back().progress <= 1.0);
}
