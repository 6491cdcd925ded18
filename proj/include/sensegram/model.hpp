#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sensegram/corpus.hpp"
#include "sensegram/lexicon.hpp"

namespace sensegram {

/// Context vectors over the word-form vocabulary and sense vectors over the
/// sense inventory, both row-major with `dim` columns.
template <typename T>
struct BasicEmbeddings {
    std::size_t dim = 0;
    std::vector<T> context;
    std::vector<T> sense;

    std::size_t context_rows() const noexcept { return dim ? context.size() / dim : 0; }
    std::size_t sense_rows() const noexcept { return dim ? sense.size() / dim : 0; }

    std::span<T> context_row(std::size_t i) noexcept { return {context.data() + i * dim, dim}; }
    std::span<const T> context_row(std::size_t i) const noexcept { return {context.data() + i * dim, dim}; }
    std::span<T> sense_row(std::size_t i) noexcept { return {sense.data() + i * dim, dim}; }
    std::span<const T> sense_row(std::size_t i) const noexcept { return {sense.data() + i * dim, dim}; }
};

using EmbeddingMatrices = BasicEmbeddings<float>;

/// Sense rows i.i.d. uniform in [-0.5/dim, 0.5/dim]; context rows zero.
EmbeddingMatrices init_model(const Vocab& vocab, const SenseInventory& inventory, std::size_t dim,
                             std::uint64_t seed);

template <typename T>
bool all_finite(const BasicEmbeddings<T>& m);

enum class VectorFormat { text, binary };

std::optional<VectorFormat> parse_vector_format(std::string_view name);

/// A labelled row-major float matrix, as stored in word2vec files.
struct LabeledVectors {
    std::vector<std::string> labels;
    std::size_t dim = 0;
    std::vector<float> data;

    std::size_t size() const noexcept { return labels.size(); }
    std::span<const float> row(std::size_t i) const noexcept { return {data.data() + i * dim, dim}; }
};

/// word2vec layout: "<rows> <dim>\n" then one row per label.
/// text: label and dim decimals (9 significant digits) separated by spaces.
/// binary: label, a space, dim little-endian float32 values, newline.
void save_labeled_vectors(std::span<const std::string> labels, std::size_t dim, std::span<const float> data,
                          const std::filesystem::path& path, VectorFormat format);

/// Writes the sense matrix with inventory labels (monosemic senses use the bare token).
void save_vectors(const EmbeddingMatrices& matrices, const SenseInventory& inventory,
                  const std::filesystem::path& path, VectorFormat format);

/// Reads either format; when `format` is empty it is detected from the first row.
LabeledVectors load_vectors(const std::filesystem::path& path, std::optional<VectorFormat> format = std::nullopt);
LabeledVectors parse_vectors(std::string_view bytes, std::optional<VectorFormat> format = std::nullopt,
                             const std::string& source = "<vectors>");

/// Model metadata stored next to the matrices.
struct ModelHeader {
    std::string version = "SENSEGRAM-MODEL v1";
    std::size_t dim = 0;
    std::size_t vocab_size = 0;
    std::size_t sense_count = 0;
    std::uint64_t seed = 0;
    /// Training configuration snapshot, in insertion order.
    std::vector<std::pair<std::string, std::string>> config;

    std::string serialize() const;
    static ModelHeader parse(std::string_view text);
    friend bool operator==(const ModelHeader&, const ModelHeader&) = default;
};

/// A saved model: `<path>` sense vectors, `<path>.ctx` context vectors (binary),
/// `<path>.vocab` vocabulary, `<path>.header` metadata.
struct Checkpoint {
    ModelHeader header;
    Vocab vocab;
    SenseInventory inventory;
    EmbeddingMatrices matrices;
};

void save_checkpoint(const std::filesystem::path& path, const ModelHeader& header, const Vocab& vocab,
                     const SenseInventory& inventory, const EmbeddingMatrices& matrices,
                     VectorFormat sense_format = VectorFormat::binary);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path with_suffix(const std::filesystem::path& path, std::string_view suffix);

}  // namespace sensegram
