#include "sensegram/model.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sensegram/error.hpp"
#include "sensegram/rng.hpp"

namespace sensegram {

EmbeddingMatrices init_model(const Vocab& vocab, const SenseInventory& inventory, std::size_t dim,
                             std::uint64_t seed) {
    if (dim == 0) throw UsageError("dimension must be positive");
    EmbeddingMatrices m;
    m.dim = dim;
    m.context.assign(vocab.size() * dim, 0.0f);
    m.sense.resize(inventory.total_senses() * dim);
    Rng rng(seed);
    const double scale = 1.0 / static_cast<double>(dim);
    for (auto& x : m.sense) x = static_cast<float>((rng.uniform() - 0.5) * scale);
    return m;
}

template <typename T>
bool all_finite(const BasicEmbeddings<T>& m) {
    auto finite = [](const std::vector<T>& v) {
        for (T x : v)
            if (!std::isfinite(x)) return false;
        return true;
    };
    return finite(m.context) && finite(m.sense);
}

template bool all_finite(const BasicEmbeddings<float>&);
template bool all_finite(const BasicEmbeddings<double>&);

std::optional<VectorFormat> parse_vector_format(std::string_view name) {
    if (name == "text") return VectorFormat::text;
    if (name == "binary") return VectorFormat::binary;
    return std::nullopt;
}

std::filesystem::path with_suffix(const std::filesystem::path& path, std::string_view suffix) {
    auto s = path.string();
    s += suffix;
    return s;
}

void save_labeled_vectors(std::span<const std::string> labels, std::size_t dim, std::span<const float> data,
                          const std::filesystem::path& path, VectorFormat format) {
    if (data.size() != labels.size() * dim) throw UsageError("vector data does not match label count");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << labels.size() << ' ' << dim << '\n';
    std::string buf;
    char num[32];
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const float* row = data.data() + r * dim;
        buf.assign(labels[r]);
        if (format == VectorFormat::text) {
            for (std::size_t j = 0; j < dim; ++j) {
                const int n = std::snprintf(num, sizeof num, " %.9g", static_cast<double>(row[j]));
                buf.append(num, static_cast<std::size_t>(n));
            }
        } else {
            buf.push_back(' ');
            for (std::size_t j = 0; j < dim; ++j) {
                const auto bits = std::bit_cast<std::uint32_t>(row[j]);
                const char le[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                                    static_cast<char>((bits >> 16) & 0xFF), static_cast<char>((bits >> 24) & 0xFF)};
                buf.append(le, 4);
            }
        }
        buf.push_back('\n');
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    out.flush();
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void save_vectors(const EmbeddingMatrices& matrices, const SenseInventory& inventory,
                  const std::filesystem::path& path, VectorFormat format) {
    if (matrices.sense_rows() != inventory.total_senses())
        throw UsageError("sense matrix has " + std::to_string(matrices.sense_rows()) + " rows but inventory has " +
                         std::to_string(inventory.total_senses()) + " senses");
    save_labeled_vectors(inventory.labels(), matrices.dim, matrices.sense, path, format);
}

namespace {

struct Cursor {
    std::string_view bytes;
    std::size_t pos = 0;
    const std::string& source;

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError(source + ": " + what + " (byte " + std::to_string(pos) + ")");
    }
    bool at_end() const noexcept { return pos >= bytes.size(); }
    void skip_spaces() {
        while (!at_end() && (bytes[pos] == ' ' || bytes[pos] == '\t' || bytes[pos] == '\r')) ++pos;
    }
    void skip_newlines() {
        while (!at_end() && (bytes[pos] == '\n' || bytes[pos] == '\r')) ++pos;
    }
    std::string_view word() {
        skip_spaces();
        const std::size_t start = pos;
        while (!at_end() && bytes[pos] != ' ' && bytes[pos] != '\t' && bytes[pos] != '\n' && bytes[pos] != '\r')
            ++pos;
        return bytes.substr(start, pos - start);
    }
};

template <typename T>
bool parse_number(std::string_view s, T& value) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

bool first_row_is_text(std::string_view rest, std::size_t dim) {
    const auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    std::size_t fields = 0;
    std::size_t i = 0;
    bool label = true;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\r')) ++i;
        if (i >= line.size()) break;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\r') ++j;
        if (!label) {
            float v;
            if (!parse_number(line.substr(i, j - i), v)) return false;
            ++fields;
        }
        label = false;
        i = j;
    }
    return fields == dim;
}

}  // namespace

LabeledVectors parse_vectors(std::string_view bytes, std::optional<VectorFormat> format, const std::string& source) {
    Cursor cur{bytes, 0, source};
    std::size_t rows = 0;
    LabeledVectors out;
    if (!parse_number(cur.word(), rows) || !parse_number(cur.word(), out.dim) || out.dim == 0)
        cur.fail("expected header '<rows> <dim>'");
    cur.skip_spaces();
    if (cur.at_end() || bytes[cur.pos] != '\n') cur.fail("malformed header line");
    ++cur.pos;
    const std::size_t dim = out.dim;
    if (!format) format = rows == 0 || first_row_is_text(bytes.substr(cur.pos), dim) ? VectorFormat::text
                                                                                     : VectorFormat::binary;
    out.labels.reserve(rows);
    out.data.reserve(rows * dim);
    for (std::size_t r = 0; r < rows; ++r) {
        cur.skip_newlines();
        if (cur.at_end())
            cur.fail("header declares " + std::to_string(rows) + " rows but file has " + std::to_string(r));
        auto label = cur.word();
        if (label.empty()) cur.fail("empty label in row " + std::to_string(r));
        out.labels.emplace_back(label);
        if (*format == VectorFormat::text) {
            for (std::size_t j = 0; j < dim; ++j) {
                float v = 0;
                auto field = cur.word();
                if (field.empty()) cur.fail("row '" + out.labels.back() + "' has fewer than " + std::to_string(dim) + " values");
                if (!parse_number(field, v)) cur.fail("bad value '" + std::string(field) + "'");
                out.data.push_back(v);
            }
            cur.skip_spaces();
            if (!cur.at_end() && bytes[cur.pos] != '\n')
                cur.fail("row '" + out.labels.back() + "' has more than " + std::to_string(dim) + " values");
        } else {
            if (cur.at_end() || bytes[cur.pos] != ' ') cur.fail("expected space after label");
            ++cur.pos;
            if (bytes.size() - cur.pos < dim * 4)
                cur.fail("row '" + out.labels.back() + "' truncated");
            for (std::size_t j = 0; j < dim; ++j) {
                const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + cur.pos);
                const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                                           (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
                out.data.push_back(std::bit_cast<float>(bits));
                cur.pos += 4;
            }
        }
        for (std::size_t j = out.data.size() - dim; j < out.data.size(); ++j)
            if (!std::isfinite(out.data[j])) cur.fail("non-finite value in row '" + out.labels.back() + "'");
    }
    cur.skip_newlines();
    cur.skip_spaces();
    if (!cur.at_end()) cur.fail("more rows than the declared " + std::to_string(rows));
    return out;
}

LabeledVectors load_vectors(const std::filesystem::path& path, std::optional<VectorFormat> format) {
    const auto bytes = read_file(path);
    return parse_vectors(bytes, format, path.string());
}

std::string ModelHeader::serialize() const {
    std::ostringstream out;
    out << version << '\n'
        << "dim=" << dim << '\n'
        << "vocab=" << vocab_size << '\n'
        << "senses=" << sense_count << '\n'
        << "seed=" << seed << '\n';
    for (const auto& [k, v] : config) out << "config." << k << '=' << v << '\n';
    return out.str();
}

ModelHeader ModelHeader::parse(std::string_view text) {
    ModelHeader h;
    std::size_t pos = 0;
    auto next_line = [&]() -> std::optional<std::string_view> {
        if (pos >= text.size()) return std::nullopt;
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };
    auto first = next_line();
    if (!first || first->rfind("SENSEGRAM-MODEL ", 0) != 0) throw DataError("model header: bad version line");
    h.version = std::string(*first);
    bool seen[4] = {false, false, false, false};
    while (auto line = next_line()) {
        if (line->empty()) continue;
        const auto eq = line->find('=');
        if (eq == std::string_view::npos) throw DataError("model header: expected key=value, got '" + std::string(*line) + "'");
        const auto key = line->substr(0, eq);
        const auto value = line->substr(eq + 1);
        auto number = [&](auto& field, int slot) {
            if (!parse_number(value, field)) throw DataError("model header: bad value for " + std::string(key));
            seen[slot] = true;
        };
        if (key == "dim") number(h.dim, 0);
        else if (key == "vocab") number(h.vocab_size, 1);
        else if (key == "senses") number(h.sense_count, 2);
        else if (key == "seed") number(h.seed, 3);
        else if (key.rfind("config.", 0) == 0) h.config.emplace_back(key.substr(7), value);
        else throw DataError("model header: unknown key '" + std::string(key) + "'");
    }
    for (bool s : seen)
        if (!s) throw DataError("model header: missing required field");
    return h;
}

void save_checkpoint(const std::filesystem::path& path, const ModelHeader& header, const Vocab& vocab,
                     const SenseInventory& inventory, const EmbeddingMatrices& matrices, VectorFormat sense_format) {
    if (matrices.context_rows() != vocab.size() || matrices.sense_rows() != inventory.total_senses())
        throw UsageError("matrix shapes do not match vocabulary and inventory");
    save_vectors(matrices, inventory, path, sense_format);
    std::vector<std::string> tokens;
    tokens.reserve(vocab.size());
    for (const auto& e : vocab.entries()) tokens.push_back(e.token);
    save_labeled_vectors(tokens, matrices.dim, matrices.context, with_suffix(path, ".ctx"), VectorFormat::binary);
    vocab.save(with_suffix(path, ".vocab"));
    const auto hp = with_suffix(path, ".header");
    std::ofstream out(hp, std::ios::binary);
    if (!out) throw DataError("cannot open '" + hp.string() + "' for writing");
    out << header.serialize();
    if (!out) throw DataError("write failed for '" + hp.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Checkpoint ck;
    ck.header = ModelHeader::parse(read_file(with_suffix(path, ".header")));
    ck.vocab = Vocab::load(with_suffix(path, ".vocab"));
    auto senses = load_vectors(path);
    auto context = load_vectors(with_suffix(path, ".ctx"), VectorFormat::binary);
    if (senses.dim != ck.header.dim || context.dim != ck.header.dim)
        throw DataError(path.string() + ": vector dimension disagrees with header");
    if (context.size() != ck.vocab.size() || ck.header.vocab_size != ck.vocab.size())
        throw DataError(path.string() + ": context rows disagree with vocabulary");
    for (std::size_t i = 0; i < context.size(); ++i)
        if (context.labels[i] != ck.vocab.token(static_cast<WordId>(i)))
            throw DataError(path.string() + ": context label '" + context.labels[i] + "' out of vocabulary order");
    if (senses.size() != ck.header.sense_count) throw DataError(path.string() + ": sense rows disagree with header");
    ck.inventory = SenseInventory::from_labels(ck.vocab, senses.labels);
    ck.matrices.dim = ck.header.dim;
    ck.matrices.sense = std::move(senses.data);
    ck.matrices.context = std::move(context.data);
    return ck;
}

}  // namespace sensegram
