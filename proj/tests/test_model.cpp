#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "sensegram/error.hpp"
#include "sensegram/model.hpp"
#include "support.hpp"

using namespace sensegram;
using sensegram::testing::TempDir;

namespace {

Vocab small_vocab() { return Vocab({{"a", 4}, {"b", 3}, {"c", 2}}); }

SenseInventory small_inventory(const Vocab& v) {
    SenseCounts counts;
    counts.counts["a"] = 3;
    return build_sense_inventory(v, counts, 8);
}

std::string bytes_of(const std::filesystem::path& p) { return read_file(p); }

}  // namespace

TEST_CASE("init_model shapes, range and determinism") {
    auto vocab = small_vocab();
    auto inv = small_inventory(vocab);
    auto m = init_model(vocab, inv, 4, 77);
    CHECK(m.dim == 4);
    CHECK(m.context_rows() == 3);
    CHECK(m.sense_rows() == 5);
    for (float x : m.context) CHECK(x == 0.0f);
    for (float x : m.sense) {
        CHECK(x >= -0.5f / 4);
        CHECK(x <= 0.5f / 4);
    }
    auto again = init_model(vocab, inv, 4, 77);
    CHECK(again.sense == m.sense);
    CHECK(init_model(vocab, inv, 4, 78).sense != m.sense);
    CHECK(all_finite(m));
    CHECK_THROWS_AS(init_model(vocab, inv, 0, 1), UsageError);
}

TEST_CASE("init_model sample mean agrees with the uniform law") {
    std::vector<VocabEntry> entries;
    for (int i = 0; i < 10000; ++i) entries.push_back({"w" + std::to_string(100000 + i), 1});
    Vocab vocab(entries);
    auto inv = SenseInventory::monosemic(vocab);
    const std::size_t dim = 200;
    auto m = init_model(vocab, inv, dim, 2024);
    double sum = 0.0, sq = 0.0;
    for (float x : m.sense) {
        sum += x;
        sq += static_cast<double>(x) * x;
    }
    const double n = static_cast<double>(m.sense.size());
    const double mean = sum / n;
    const double sigma = (1.0 / dim) / std::sqrt(12.0);
    CHECK(std::abs(mean) <= 3.0 * sigma / std::sqrt(n));
    const double var = sq / n - mean * mean;
    CHECK(var == doctest::Approx(sigma * sigma).epsilon(0.01));
}

TEST_CASE("binary layout is exact") {
    TempDir dir;
    save_labeled_vectors(std::vector<std::string>{"a", "bb"}, 2, std::vector<float>{1.0f, -2.0f, 0.5f, 0.0f},
                         dir / "v.bin", VectorFormat::binary);
    const auto got = bytes_of(dir / "v.bin");
    std::string expected = "2 2\na ";
    auto put = [&](float f) {
        const auto u = std::bit_cast<std::uint32_t>(f);
        for (int i = 0; i < 4; ++i) expected.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
    };
    put(1.0f);
    put(-2.0f);
    expected += "\nbb ";
    put(0.5f);
    put(0.0f);
    expected += "\n";
    CHECK(got == expected);
}

TEST_CASE("text layout") {
    TempDir dir;
    save_labeled_vectors(std::vector<std::string>{"x"}, 3, std::vector<float>{0.25f, -1.0f, 3.0f}, dir / "v.txt",
                         VectorFormat::text);
    CHECK(bytes_of(dir / "v.txt") == "1 3\nx 0.25 -1 3\n");
}

TEST_CASE("save_vectors labels monosemic senses with the bare token") {
    TempDir dir;
    auto vocab = small_vocab();
    auto inv = small_inventory(vocab);
    auto m = init_model(vocab, inv, 5, 3);
    save_vectors(m, inv, dir / "s.txt", VectorFormat::text);
    auto lv = load_vectors(dir / "s.txt");
    CHECK(lv.labels == std::vector<std::string>{"a#1", "a#2", "a#3", "b", "c"});
    CHECK(lv.dim == 5);
}

TEST_CASE("binary round trip is bitwise lossless") {
    TempDir dir;
    Rng rng(5);
    std::vector<std::string> labels;
    for (int i = 0; i < 50; ++i) labels.push_back("l" + std::to_string(i));
    auto data = testing::random_floats(50 * 17, rng, 1e3);
    data[3] = std::numeric_limits<float>::denorm_min();
    data[4] = -0.0f;
    save_labeled_vectors(labels, 17, data, dir / "v.bin", VectorFormat::binary);
    for (auto fmt : {std::optional<VectorFormat>{}, std::optional<VectorFormat>{VectorFormat::binary}}) {
        auto lv = load_vectors(dir / "v.bin", fmt);
        CHECK(lv.labels == labels);
        REQUIRE(lv.data.size() == data.size());
        CHECK(std::memcmp(lv.data.data(), data.data(), data.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("text round trip stays within the decimal budget") {
    TempDir dir;
    Rng rng(6);
    std::vector<std::string> labels;
    for (int i = 0; i < 100; ++i) labels.push_back("v" + std::to_string(i));
    auto data = testing::random_floats(100 * 32, rng, 0.7);
    save_labeled_vectors(labels, 32, data, dir / "v.txt", VectorFormat::text);
    auto lv = load_vectors(dir / "v.txt");
    double max_entry = 0.0, max_err = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        max_entry = std::max(max_entry, std::abs(static_cast<double>(data[i])));
        max_err = std::max(max_err, std::abs(static_cast<double>(data[i]) - lv.data[i]));
    }
    CHECK(max_err <= 1e-6 * max_entry);
}

TEST_CASE("shape and value errors") {
    CHECK_THROWS_WITH_AS(parse_vectors("2 3\na 1 2 3\n"), doctest::Contains("declares 2 rows"), DataError);
    CHECK_THROWS_AS(parse_vectors("1 3\na 1 2\n", VectorFormat::text), DataError);
    CHECK_THROWS_AS(parse_vectors("1 2\na 1 2 3\n", VectorFormat::text), DataError);
    CHECK_THROWS_AS(parse_vectors("1 2\na 1 2\nb 3 4\n"), DataError);
    CHECK_THROWS_AS(parse_vectors("1 2\na 1 nan\n", VectorFormat::text), DataError);
    CHECK_THROWS_AS(parse_vectors("1 2\na inf 1\n", VectorFormat::text), DataError);
    CHECK_THROWS_AS(parse_vectors("x 2\n"), DataError);
    CHECK_THROWS_AS(parse_vectors("2 2\na \x01\x02\n"), DataError);

    std::string bin = "1 1\na ";
    const auto nan_bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
    for (int i = 0; i < 4; ++i) bin.push_back(static_cast<char>((nan_bits >> (8 * i)) & 0xFF));
    bin += "\n";
    CHECK_THROWS_WITH_AS(parse_vectors(bin, VectorFormat::binary), doctest::Contains("non-finite"), DataError);
    CHECK(parse_vectors("0 4\n").size() == 0);
}

TEST_CASE("model header round trips byte for byte") {
    ModelHeader h;
    h.dim = 50;
    h.vocab_size = 1000;
    h.sense_count = 1001;
    h.seed = 42;
    h.config = {{"window", "5"}, {"alpha", "0.025000000000000001"}, {"boundary_token", ""}};
    const auto text = h.serialize();
    const auto back = ModelHeader::parse(text);
    CHECK(back == h);
    CHECK(back.serialize() == text);
    CHECK_THROWS_AS(ModelHeader::parse("garbage\n"), DataError);
    CHECK_THROWS_AS(ModelHeader::parse("SENSEGRAM-MODEL v1\ndim=3\n"), DataError);
}

TEST_CASE("checkpoint round trip") {
    TempDir dir;
    auto vocab = small_vocab();
    auto inv = small_inventory(vocab);
    auto m = init_model(vocab, inv, 6, 9);
    Rng rng(1);
    auto ctx = testing::random_floats(m.context.size(), rng);
    m.context = ctx;
    ModelHeader h;
    h.dim = 6;
    h.vocab_size = vocab.size();
    h.sense_count = inv.total_senses();
    h.seed = 9;
    save_checkpoint(dir / "model.bin", h, vocab, inv, m);
    auto ck = load_checkpoint(dir / "model.bin");
    CHECK(ck.header == h);
    CHECK(ck.vocab == vocab);
    CHECK(ck.inventory.labels() == inv.labels());
    CHECK(ck.matrices.sense == m.sense);
    CHECK(ck.matrices.context == m.context);

    save_checkpoint(dir / "model.txt", h, vocab, inv, m, VectorFormat::text);
    CHECK(load_checkpoint(dir / "model.txt").matrices.sense == m.sense);
}
