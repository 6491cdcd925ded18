#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sensegram/corpus.hpp"

namespace sensegram {

using SenseId = std::uint32_t;

struct SenseCounts {
    std::unordered_map<std::string, std::uint32_t> counts;
    /// Tokens listed more than once; the last entry wins.
    std::size_t duplicates = 0;
};

/// Reads "token<TAB>K" lines. '#' starts a comment line; blank lines are skipped.
SenseCounts load_sense_counts(const std::filesystem::path& path);
SenseCounts parse_sense_counts(std::istream& in, const std::string& source = "<lexicon>");

struct SenseBlock {
    SenseId first = 0;
    std::uint32_t k = 1;
};

/// Maps each vocabulary word to a contiguous block of sense ids.
class SenseInventory {
public:
    SenseInventory() = default;

    const SenseBlock& block(WordId word) const { return blocks_.at(word); }
    std::uint32_t senses_of(WordId word) const { return blocks_.at(word).k; }
    std::size_t word_count() const noexcept { return blocks_.size(); }
    std::size_t total_senses() const noexcept { return words_.size(); }
    WordId word_of(SenseId sense) const { return words_.at(sense); }
    /// 1-based index of the sense within its word's block.
    std::uint32_t index_of(SenseId sense) const { return sense - blocks_.at(words_.at(sense)).first + 1; }
    const std::string& label(SenseId sense) const { return labels_.at(sense); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    std::optional<SenseId> find_label(std::string_view label) const;

    std::size_t polysemic_words() const noexcept { return polysemic_; }
    /// Lexicon entries whose token is not in the vocabulary.
    std::size_t ignored_entries() const noexcept { return ignored_; }

    /// Every word gets exactly one sense; sense ids coincide with word ids.
    static SenseInventory monosemic(const Vocab& vocab);

    /// Rebuilds an inventory from sense labels as written by save_vectors.
    static SenseInventory from_labels(const Vocab& vocab, const std::vector<std::string>& labels);

    friend SenseInventory build_sense_inventory(const Vocab& vocab, const SenseCounts& counts, std::uint32_t max_k);

private:
    void finish(const Vocab& vocab);

    std::vector<SenseBlock> blocks_;
    std::vector<WordId> words_;
    std::vector<std::string> labels_;
    std::unordered_map<std::string, SenseId> label_index_;
    std::size_t polysemic_ = 0;
    std::size_t ignored_ = 0;
};

/// K(w) = min(counts[w] or 1, max_k); sense ids follow vocabulary id order.
SenseInventory build_sense_inventory(const Vocab& vocab, const SenseCounts& counts, std::uint32_t max_k = 8);

/// "token#k" for polysemic words, bare token when K = 1.
std::string sense_label(std::string_view token, std::uint32_t index, std::uint32_t k);

/// Splits "token#k" into (token, k). Returns nullopt for labels without a numeric suffix.
std::optional<std::pair<std::string, std::uint32_t>> split_sense_label(std::string_view label);

}  // namespace sensegram
