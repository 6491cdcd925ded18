#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sensegram/model.hpp"

namespace sensegram {

/// a.b / (|a| |b|). Throws UsageError when either vector is zero.
double cosine(std::span<const float> a, std::span<const float> b);
double cosine(std::span<const double> a, std::span<const double> b);

/// Labelled vectors with a label index and cached norms.
class VectorStore {
public:
    explicit VectorStore(LabeledVectors vectors);

    std::size_t size() const noexcept { return vectors_.size(); }
    std::size_t dim() const noexcept { return vectors_.dim; }
    const std::string& label(std::size_t i) const { return vectors_.labels.at(i); }
    std::span<const float> row(std::size_t i) const { return vectors_.row(i); }
    double norm(std::size_t i) const { return norms_.at(i); }
    std::optional<std::size_t> find(std::string_view label) const;
    /// Up to `limit` labels closest to `label` by edit distance.
    std::vector<std::string> suggestions(std::string_view label, std::size_t limit = 5) const;

    /// Row index of `label`; throws UsageError naming close matches when absent.
    std::size_t require(std::string_view label) const;

private:
    LabeledVectors vectors_;
    std::vector<double> norms_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Word part of a sense label: "rock-noun#2" -> "rock-noun", bare labels unchanged.
std::string label_word(std::string_view label);

struct Neighbor {
    std::string label;
    double similarity = 0.0;
};

struct NeighborResult {
    std::string query;
    std::vector<Neighbor> neighbors;  ///< descending similarity, ties by label
};

struct NeighborOptions {
    /// Include other senses of the query's own word.
    bool include_own_senses = false;
};

/// Exact top-k by cosine over every other label (full scan). Zero rows are skipped.
NeighborResult nearest_neighbors(std::string_view label, std::size_t k, const VectorStore& store,
                                 const NeighborOptions& options = {});

enum class DistanceMetric { euclidean, cosine };
std::optional<DistanceMetric> parse_metric(std::string_view name);

struct ProjectedPoint {
    std::string label;
    double x = 0.0;
    double y = 0.0;
};

struct Projection2D {
    std::vector<ProjectedPoint> points;
    double eigenvalues[2] = {0.0, 0.0};
    std::vector<std::string> warnings;
};

/// Top eigenpairs of a symmetric matrix, largest eigenvalue first.
struct Eigenpairs {
    std::vector<double> values;
    /// Column j is vectors[j], unit length.
    std::vector<std::vector<double>> vectors;
    std::size_t iterations = 0;
};

/// Subspace iteration with Rayleigh-Ritz refinement on a dense symmetric
/// n x n row-major matrix. Converges when every requested Ritz pair has a
/// residual below tol * max|eigenvalue|.
Eigenpairs top_eigenpairs(std::span<const double> matrix, std::size_t n, std::size_t count, double tol = 1e-13,
                          std::size_t max_iterations = 20000);

/// -1/2 J D2 J for a squared-distance matrix D2 (n x n row-major).
std::vector<double> double_center(std::span<const double> squared_distances, std::size_t n);

/// Classical (Torgerson) MDS to two dimensions of a squared-distance matrix.
/// Axis signs are chosen so the first point with a non-zero coordinate on each
/// axis has a positive coordinate.
Projection2D classical_mds_2d(std::span<const double> squared_distances, std::size_t n,
                              std::span<const std::string> labels);

/// Projects the named labels. Requires 2 <= labels.size() <= 1000.
Projection2D project_2d(std::span<const std::string> labels, const VectorStore& store,
                        DistanceMetric metric = DistanceMetric::euclidean);

/// "label<TAB>x<TAB>y" per line.
void write_projection_tsv(const Projection2D& projection, const std::filesystem::path& path);
void write_projection_svg(const Projection2D& projection, const std::filesystem::path& path);

}  // namespace sensegram
