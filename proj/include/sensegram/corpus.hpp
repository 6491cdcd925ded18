#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sensegram/rng.hpp"

namespace sensegram {

using WordId = std::uint32_t;

/// A token is a non-empty run of non-whitespace bytes ("dricka-verb").
bool is_valid_token(std::string_view token) noexcept;

struct VocabEntry {
    std::string token;
    std::uint64_t count = 0;
};

/// Word-form vocabulary. Ids are dense, in descending count order with ties
/// broken lexicographically.
class Vocab {
public:
    Vocab() = default;

    /// Entries must already be in id order; throws DataError otherwise.
    explicit Vocab(std::vector<VocabEntry> entries);

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<VocabEntry>& entries() const noexcept { return entries_; }
    const std::string& token(WordId id) const { return entries_.at(id).token; }
    std::uint64_t count(WordId id) const { return entries_.at(id).count; }
    std::uint64_t total_tokens() const noexcept { return total_; }
    std::optional<WordId> find(std::string_view token) const;

    /// "SENSEGRAM-VOCAB v1 total=<N>" header, then "token<TAB>count" in id order.
    void save(const std::filesystem::path& path) const;
    static Vocab load(const std::filesystem::path& path);

    friend bool operator==(const Vocab& a, const Vocab& b) {
        if (a.entries_.size() != b.entries_.size()) return false;
        for (std::size_t i = 0; i < a.entries_.size(); ++i)
            if (a.entries_[i].token != b.entries_[i].token || a.entries_[i].count != b.entries_[i].count)
                return false;
        return true;
    }

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
    };
    std::vector<VocabEntry> entries_;
    std::unordered_map<std::string, WordId, Hash, std::equal_to<>> index_;
    std::uint64_t total_ = 0;
};

/// Tokenization settings shared by every corpus reader.
struct CorpusOptions {
    /// Extra token that ends a sentence in addition to newline. Empty means none.
    std::string boundary_token;
};

/// Builds a vocabulary from an in-memory token sequence.
Vocab build_vocab(std::span<const std::string> tokens, std::uint64_t min_count);

/// Builds a vocabulary from raw corpus text (whitespace separated, newline = boundary).
Vocab build_vocab_from_text(std::string_view text, std::uint64_t min_count, const CorpusOptions& options = {});

std::string read_file(const std::filesystem::path& path);

/// Calls fn(tokens, line_offset) for each sentence of `text`; tokens is a
/// vector<string_view>. Empty sentences are skipped.
template <typename Fn>
void for_each_sentence(std::string_view text, const CorpusOptions& options, Fn&& fn);

/// Corpus encoded to vocabulary ids with out-of-vocabulary tokens removed.
struct EncodedCorpus {
    std::vector<WordId> ids;
    /// Sentence i spans ids[sentence_starts[i], sentence_starts[i+1]).
    std::vector<std::size_t> sentence_starts{0};
    /// Byte offset in the source text of the line holding sentence i.
    std::vector<std::uint64_t> sentence_offsets;
    std::uint64_t raw_tokens = 0;

    std::size_t sentence_count() const noexcept { return sentence_starts.size() - 1; }
    std::span<const WordId> sentence(std::size_t i) const {
        return std::span<const WordId>(ids).subspan(sentence_starts[i], sentence_starts[i + 1] - sentence_starts[i]);
    }
};

EncodedCorpus encode_text(std::string_view text, const Vocab& vocab, const CorpusOptions& options = {});

/// Encodes a single token sequence (one sentence, boundary token honoured).
EncodedCorpus encode_tokens(std::span<const std::string> tokens, const Vocab& vocab, const CorpusOptions& options = {});

/// Splits sentences into `parts` contiguous shards whose boundaries are the
/// line-aligned byte offsets nearest to size*i/parts. Returns parts+1 sentence indices.
std::vector<std::size_t> shard_sentences(const EncodedCorpus& corpus, std::uint64_t text_bytes, std::size_t parts);

struct WindowExample {
    WordId target = 0;
    std::vector<WordId> contexts;
};

struct WindowOptions {
    std::size_t window = 5;  ///< per side
    bool dynamic = true;     ///< effective window drawn uniformly from 1..window per target
};

/// Visits every target of one sentence with a non-empty context window.
/// `fn(std::size_t position, WordId target, std::span<const WordId> contexts)`.
/// With dynamic windows one draw is consumed per target position, whether or
/// not it yields an example.
template <typename Fn>
void for_each_window(std::span<const WordId> sentence, const WindowOptions& options, Rng& rng,
                     std::vector<WordId>& scratch, Fn&& fn) {
    const std::size_t n = sentence.size();
    for (std::size_t pos = 0; pos < n; ++pos) {
        std::size_t span = options.window;
        if (options.dynamic) span = static_cast<std::size_t>(rng.below(options.window)) + 1;
        scratch.clear();
        const std::size_t begin = pos >= span ? pos - span : 0;
        const std::size_t end = std::min(n, pos + span + 1);
        for (std::size_t j = begin; j < end; ++j)
            if (j != pos) scratch.push_back(sentence[j]);
        if (!scratch.empty()) fn(pos, sentence[pos], std::span<const WordId>(scratch));
    }
}

std::vector<WindowExample> iter_windows(const EncodedCorpus& corpus, const WindowOptions& options, Rng& rng);

/// Convenience over a raw token sequence: OOV tokens are dropped before windowing.
std::vector<WindowExample> iter_windows(std::span<const std::string> tokens, const Vocab& vocab,
                                        const WindowOptions& options, Rng& rng,
                                        const CorpusOptions& corpus_options = {});

/// max(0, 1 - sqrt(t / f)); zero when t == 0.
double discard_probability(double relative_frequency, double threshold) noexcept;

/// Frequent-word subsampling. t == 0 returns the input unchanged and consumes no randomness.
std::vector<WordId> subsample_filter(std::span<const WordId> ids, const Vocab& vocab, double threshold, Rng& rng);

/// Precomputed per-word discard probabilities for the training hot path.
std::vector<double> discard_table(const Vocab& vocab, double threshold);

// ---------------------------------------------------------------------------

namespace detail {
inline bool is_space(char c) noexcept { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }
}  // namespace detail

template <typename Fn>
void for_each_sentence(std::string_view text, const CorpusOptions& options, Fn&& fn) {
    std::vector<std::string_view> sentence;
    std::size_t line_start = 0;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto flush = [&](std::size_t offset) {
        if (!sentence.empty()) fn(static_cast<const std::vector<std::string_view>&>(sentence), offset);
        sentence.clear();
    };
    while (i < n) {
        const char c = text[i];
        if (c == '\n') {
            flush(line_start);
            ++i;
            line_start = i;
            continue;
        }
        if (detail::is_space(c)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && text[j] != '\n' && !detail::is_space(text[j])) ++j;
        std::string_view tok = text.substr(i, j - i);
        if (!options.boundary_token.empty() && tok == options.boundary_token)
            flush(line_start);
        else
            sentence.push_back(tok);
        i = j;
    }
    flush(line_start);
}

}  // namespace sensegram
