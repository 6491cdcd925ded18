#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sensegram/corpus.hpp"
#include "sensegram/lexicon.hpp"
#include "sensegram/model.hpp"
#include "sensegram/query.hpp"

namespace sensegram {

struct TopicSpec {
    std::size_t size = 500;  ///< vocabulary block size
    double zipf = 1.0;       ///< rank-frequency exponent
    double weight = 1.0;     ///< relative probability of a sentence drawing this topic
};

struct PseudowordSpec {
    std::string token;
    std::vector<std::string> sources;  ///< one generated token per topic
};

/// Description of a synthetic topic corpus with planted polysemy.
///
/// Topic t's vocabulary is "t<t>w<r>-nn" for ranks r = 1..size; rank r is
/// drawn with probability proportional to r^-zipf. Each sentence picks one
/// topic by weight and a length uniform in [min_sentence, max_sentence].
struct SynthSpec {
    std::vector<TopicSpec> topics;
    std::uint64_t tokens = 100000;
    std::size_t min_sentence = 8;
    std::size_t max_sentence = 16;
    std::vector<PseudowordSpec> pseudowords;
    std::uint64_t seed = 42;

    void validate() const;
    nlohmann::json to_json() const;
    static SynthSpec from_json(const nlohmann::json& j);
    static SynthSpec load(const std::filesystem::path& path);
};

std::string topic_token(std::size_t topic, std::size_t rank);
/// Topic index encoded in a generated token name, if it is one.
std::optional<std::size_t> token_topic(std::string_view token);

struct TruthEntry {
    std::uint64_t position = 0;  ///< 0-based token index in the corpus, counting every token
    std::size_t topic = 0;
    friend bool operator==(const TruthEntry&, const TruthEntry&) = default;
};

struct GroundTruth {
    std::vector<TruthEntry> entries;

    /// "position<TAB>topic" per line.
    void save(const std::filesystem::path& path) const;
    static GroundTruth load(const std::filesystem::path& path);
};

struct SynthCorpus {
    std::vector<std::string> types;
    std::vector<std::uint32_t> tokens;     ///< indices into types
    std::vector<std::size_t> sentence_ends;  ///< exclusive end offset of each sentence
    std::vector<std::size_t> sentence_topics;
    GroundTruth truth;
    std::vector<std::string> warnings;

    /// One sentence per line, tokens separated by single spaces.
    std::string text() const;
    void save(const std::filesystem::path& path) const;
};

SynthCorpus generate_corpus(const SynthSpec& spec);

/// Lexicon lines ("token<TAB>K") for the spec's pseudowords.
void save_synth_lexicon(const SynthSpec& spec, const std::filesystem::path& path);

struct SenseAssignment {
    std::size_t sense = 0;  ///< 0-based index within the word's block
    std::size_t topic = 0;
};

struct PurityReport {
    std::string pseudoword;
    std::size_t senses = 0;
    std::vector<std::size_t> topics;                    ///< distinct topics seen, ascending
    std::vector<std::vector<std::uint64_t>> confusion;  ///< [sense][topic slot]
    std::vector<std::size_t> matching;                  ///< sense -> topic slot
    std::uint64_t occurrences = 0;
    std::uint64_t skipped = 0;  ///< occurrences without any in-vocabulary context
    double purity = 0.0;

    /// Share of all occurrences credited to `sense` under the matching.
    double contribution(std::size_t sense) const;
    /// Fraction of topic slot `slot`'s occurrences assigned to its matched sense.
    double topic_recall(std::size_t slot) const;
    std::size_t matched_topic(std::size_t sense) const { return topics.at(matching.at(sense)); }
};

/// Purity under the best one-to-one sense/topic matching (exhaustive over permutations).
PurityReport purity_from_assignments(std::span<const SenseAssignment> assignments, std::size_t senses,
                                     std::vector<std::size_t> topics);

/// Re-runs sense selection with the frozen model over every ground-truth
/// occurrence (full window of `window` tokens per side, OOV removed), one
/// report per pseudoword token.
std::vector<PurityReport> score_purity(const Vocab& vocab, const SenseInventory& inventory,
                                       const EmbeddingMatrices& matrices, std::string_view corpus_text,
                                       const GroundTruth& truth, std::size_t window, std::uint64_t seed = 0,
                                       const CorpusOptions& options = {});

struct SensePrecision {
    std::string label;
    std::size_t topic = 0;
    double precision = 0.0;
    std::vector<Neighbor> neighbors;
};

/// For each sense of `pseudoword`, the fraction of its top-k neighbours whose
/// generated topic equals the topic matched to that sense. k is clamped to |S| - K.
std::vector<SensePrecision> score_neighbor_coherence(const VectorStore& senses, const SenseInventory& inventory,
                                                     const Vocab& vocab, const PurityReport& purity, std::size_t k);

}  // namespace sensegram
