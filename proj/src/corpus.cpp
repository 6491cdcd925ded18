#include "sensegram/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sensegram/error.hpp"

namespace sensegram {

bool is_valid_token(std::string_view token) noexcept {
    if (token.empty()) return false;
    return std::none_of(token.begin(), token.end(), [](char c) { return c == '\n' || detail::is_space(c); });
}

Vocab::Vocab(std::vector<VocabEntry> entries) : entries_(std::move(entries)) {
    index_.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (!is_valid_token(e.token)) throw DataError("invalid vocabulary token '" + e.token + "'");
        if (e.count == 0) throw DataError("vocabulary token '" + e.token + "' has zero count");
        if (i > 0) {
            const auto& prev = entries_[i - 1];
            if (prev.count < e.count || (prev.count == e.count && !(prev.token < e.token)))
                throw DataError("vocabulary entries out of order at '" + e.token + "'");
        }
        if (!index_.emplace(e.token, static_cast<WordId>(i)).second)
            throw DataError("duplicate vocabulary token '" + e.token + "'");
        total_ += e.count;
    }
}

std::optional<WordId> Vocab::find(std::string_view token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void Vocab::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << "SENSEGRAM-VOCAB v1 total=" << total_ << '\n';
    for (const auto& e : entries_) out << e.token << '\t' << e.count << '\n';
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Vocab Vocab::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open vocabulary '" + path.string() + "'");
    std::string line;
    const std::string magic = "SENSEGRAM-VOCAB v1 total=";
    if (!std::getline(in, line) || line.rfind(magic, 0) != 0)
        throw DataError(path.string() + ": missing SENSEGRAM-VOCAB v1 header");
    std::uint64_t declared = 0;
    try {
        declared = std::stoull(line.substr(magic.size()));
    } catch (const std::exception&) {
        throw DataError(path.string() + ": bad total in header");
    }
    std::vector<VocabEntry> entries;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected token<TAB>count");
        VocabEntry e;
        e.token = line.substr(0, tab);
        const std::string count = line.substr(tab + 1);
        std::size_t used = 0;
        try {
            e.count = std::stoull(count, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != count.size())
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad count '" + count + "'");
        entries.push_back(std::move(e));
    }
    Vocab v(std::move(entries));
    if (v.total_tokens() != declared)
        throw DataError(path.string() + ": header total " + std::to_string(declared) + " disagrees with entries (" +
                        std::to_string(v.total_tokens()) + ")");
    return v;
}

namespace {

template <typename Map>
Vocab vocab_from_counts(const Map& counts, std::uint64_t seen, std::uint64_t min_count) {
    if (seen == 0) throw DataError("empty corpus");
    std::vector<VocabEntry> entries;
    for (const auto& [token, count] : counts)
        if (count >= min_count) entries.push_back({std::string(token), count});
    if (entries.empty()) throw DataError("vocabulary empty after pruning");
    std::sort(entries.begin(), entries.end(), [](const VocabEntry& a, const VocabEntry& b) {
        return a.count != b.count ? a.count > b.count : a.token < b.token;
    });
    return Vocab(std::move(entries));
}

}  // namespace

Vocab build_vocab(std::span<const std::string> tokens, std::uint64_t min_count) {
    if (min_count == 0) throw UsageError("min_count must be positive");
    std::unordered_map<std::string_view, std::uint64_t> counts;
    for (const auto& t : tokens) {
        if (!is_valid_token(t)) throw DataError("invalid token '" + t + "'");
        ++counts[t];
    }
    return vocab_from_counts(counts, tokens.size(), min_count);
}

Vocab build_vocab_from_text(std::string_view text, std::uint64_t min_count, const CorpusOptions& options) {
    if (min_count == 0) throw UsageError("min_count must be positive");
    std::unordered_map<std::string_view, std::uint64_t> counts;
    std::uint64_t seen = 0;
    for_each_sentence(text, options, [&](const std::vector<std::string_view>& sentence, std::size_t) {
        for (auto t : sentence) ++counts[t];
        seen += sentence.size();
    });
    return vocab_from_counts(counts, seen, min_count);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw DataError("read failed for '" + path.string() + "'");
    return std::move(ss).str();
}

EncodedCorpus encode_text(std::string_view text, const Vocab& vocab, const CorpusOptions& options) {
    EncodedCorpus out;
    for_each_sentence(text, options, [&](const std::vector<std::string_view>& sentence, std::size_t offset) {
        out.raw_tokens += sentence.size();
        const std::size_t before = out.ids.size();
        for (auto t : sentence)
            if (auto id = vocab.find(t)) out.ids.push_back(*id);
        if (out.ids.size() > before) {
            out.sentence_starts.push_back(out.ids.size());
            out.sentence_offsets.push_back(offset);
        }
    });
    return out;
}

EncodedCorpus encode_tokens(std::span<const std::string> tokens, const Vocab& vocab, const CorpusOptions& options) {
    EncodedCorpus out;
    out.raw_tokens = tokens.size();
    auto close = [&] {
        if (out.ids.size() > out.sentence_starts.back()) {
            out.sentence_starts.push_back(out.ids.size());
            out.sentence_offsets.push_back(0);
        }
    };
    for (const auto& t : tokens) {
        if (!options.boundary_token.empty() && t == options.boundary_token) {
            close();
            continue;
        }
        if (auto id = vocab.find(t)) out.ids.push_back(*id);
    }
    close();
    return out;
}

std::vector<std::size_t> shard_sentences(const EncodedCorpus& corpus, std::uint64_t text_bytes, std::size_t parts) {
    if (parts == 0) throw UsageError("shard count must be positive");
    std::vector<std::size_t> bounds(parts + 1, 0);
    const auto& offs = corpus.sentence_offsets;
    for (std::size_t i = 1; i < parts; ++i) {
        const auto target = static_cast<std::uint64_t>((static_cast<__uint128_t>(text_bytes) * i) / parts);
        bounds[i] = static_cast<std::size_t>(std::lower_bound(offs.begin(), offs.end(), target) - offs.begin());
        bounds[i] = std::max(bounds[i], bounds[i - 1]);
    }
    bounds[parts] = corpus.sentence_count();
    return bounds;
}

std::vector<WindowExample> iter_windows(const EncodedCorpus& corpus, const WindowOptions& options, Rng& rng) {
    if (options.window == 0) throw UsageError("window must be positive");
    std::vector<WindowExample> out;
    std::vector<WordId> scratch;
    for (std::size_t s = 0; s < corpus.sentence_count(); ++s) {
        for_each_window(corpus.sentence(s), options, rng, scratch,
                        [&](std::size_t, WordId target, std::span<const WordId> ctx) {
                            out.push_back({target, std::vector<WordId>(ctx.begin(), ctx.end())});
                        });
    }
    return out;
}

std::vector<WindowExample> iter_windows(std::span<const std::string> tokens, const Vocab& vocab,
                                        const WindowOptions& options, Rng& rng, const CorpusOptions& corpus_options) {
    return iter_windows(encode_tokens(tokens, vocab, corpus_options), options, rng);
}

double discard_probability(double relative_frequency, double threshold) noexcept {
    if (threshold <= 0.0 || relative_frequency <= 0.0) return 0.0;
    return std::max(0.0, 1.0 - std::sqrt(threshold / relative_frequency));
}

std::vector<double> discard_table(const Vocab& vocab, double threshold) {
    std::vector<double> table(vocab.size(), 0.0);
    if (threshold <= 0.0) return table;
    const double total = static_cast<double>(vocab.total_tokens());
    for (std::size_t i = 0; i < vocab.size(); ++i)
        table[i] = discard_probability(static_cast<double>(vocab.count(static_cast<WordId>(i))) / total, threshold);
    return table;
}

std::vector<WordId> subsample_filter(std::span<const WordId> ids, const Vocab& vocab, double threshold, Rng& rng) {
    if (threshold < 0.0) throw UsageError("subsample threshold must be non-negative");
    if (threshold == 0.0) return {ids.begin(), ids.end()};
    const auto table = discard_table(vocab, threshold);
    std::vector<WordId> out;
    out.reserve(ids.size());
    for (WordId id : ids) {
        const double p = table.at(id);
        if (p > 0.0 && rng.uniform() < p) continue;
        out.push_back(id);
    }
    return out;
}

}  // namespace sensegram
