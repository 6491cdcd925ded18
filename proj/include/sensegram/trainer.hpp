#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sensegram/corpus.hpp"
#include "sensegram/lexicon.hpp"
#include "sensegram/model.hpp"
#include "sensegram/rng.hpp"
#include "sensegram/vec_math.hpp"

namespace sensegram {

struct TrainConfig {
    std::size_t window = 10;  ///< per side
    std::size_t dim = 200;
    double alpha = 0.025;
    std::size_t negatives = 5;
    std::size_t epochs = 1;
    std::uint64_t min_count = 5;
    double subsample = 0.0;  ///< 0 disables frequent-word subsampling
    std::size_t workers = 1;
    std::uint64_t seed = 1;
    std::uint32_t max_k = 8;
    bool dynamic_window = true;
    std::optional<double> min_alpha;  ///< defaults to 1e-4 * alpha
    double noise_power = 0.75;
    CorpusOptions corpus;

    double effective_min_alpha() const noexcept { return min_alpha ? *min_alpha : 1e-4 * alpha; }
    /// Throws UsageError for out-of-range settings.
    void validate() const;
    /// Key/value snapshot stored in the model header.
    std::vector<std::pair<std::string, std::string>> snapshot() const;
};

/// Samples word ids with probability proportional to count^power (Walker/Vose alias table).
class NoiseTable {
public:
    NoiseTable() = default;
    NoiseTable(const Vocab& vocab, double power);

    WordId sample(Rng& rng) const noexcept {
        const auto slot = static_cast<std::size_t>(rng.below(prob_.size()));
        return rng.uniform() < prob_[slot] ? static_cast<WordId>(slot) : alias_[slot];
    }
    /// Exact target probability of `word`.
    double probability(WordId word) const { return target_.at(word); }
    std::size_t size() const noexcept { return prob_.size(); }

private:
    std::vector<double> prob_;
    std::vector<WordId> alias_;
    std::vector<double> target_;
};

NoiseTable build_noise_table(const Vocab& vocab, double power = 0.75);

/// One positive (sense, context) pair plus the given negatives, applied in place.
///
/// Positive coefficient g = alpha * (1 - sigma(v_c . v_s)), negative
/// g = -alpha * sigma(v_n . v_s). Each context row moves by g * v_s at once;
/// the sense row receives the accumulated sum of g * v_c after all pairs, so
/// every coefficient is evaluated at the pre-step parameters.
/// Returns the pair's negative-sampling loss when `want_loss`, otherwise 0.
template <typename T>
double sgns_apply(BasicEmbeddings<T>& m, SenseId sense, WordId context, std::span<const WordId> negatives,
                  double alpha, std::span<T> grad, bool want_loss = true) {
    auto s = m.sense_row(sense);
    std::fill(grad.begin(), grad.end(), T(0));
    double loss = 0.0;
    auto pair = [&](WordId word, double label) {
        auto c = m.context_row(word);
        const double f = vec::dot(std::span<const T>(c), std::span<const T>(s));
        const double sig = vec::sigmoid(f);
        const auto g = static_cast<T>(alpha * (label - sig));
        if (want_loss) loss += label > 0 ? -std::log(vec::sigmoid(f)) : -std::log(vec::sigmoid(-f));
        vec::axpy<T>(g, c, grad);
        vec::axpy<T>(g, s, c);
    };
    pair(context, 1.0);
    for (WordId n : negatives) pair(n, 0.0);
    vec::axpy<T>(T(1), grad, s);
    return loss;
}

/// Draws up to `count` negatives from `noise`, resampling collisions with
/// `context` up to 8 times before dropping that slot.
void draw_negatives(const NoiseTable& noise, WordId context, std::size_t count, Rng& rng, std::vector<WordId>& out);

/// sgns_apply with freshly drawn negatives. Returns the local loss.
double sgns_step(EmbeddingMatrices& m, SenseId sense, WordId context, const NoiseTable& noise, double alpha,
                 std::size_t negatives, Rng& rng, std::vector<WordId>& negative_scratch, std::span<float> grad,
                 bool want_loss = true);

/// max(min_alpha, alpha0 * (1 - progress)).
double lr_schedule(double progress, const TrainConfig& config) noexcept;

struct TrainStats {
    std::uint64_t words_processed = 0;  ///< in-vocabulary tokens visited (all epochs, before subsampling)
    std::uint64_t examples = 0;         ///< target occurrences trained
    std::uint64_t pairs = 0;            ///< positive (sense, context) pairs
    std::uint64_t tie_breaks = 0;
    /// updates_by_index[k]: occurrences that trained the (k+1)-th sense of a polysemic word.
    std::vector<std::uint64_t> updates_by_index;
    /// Occurrences that trained each sense id.
    std::vector<std::uint64_t> sense_occurrences;
    double loss_sum = 0.0;
    std::uint64_t loss_samples = 0;
    double wall_seconds = 0.0;

    double mean_loss() const noexcept { return loss_samples ? loss_sum / static_cast<double>(loss_samples) : 0.0; }
    void merge(const TrainStats& other);
};

struct ProgressInfo {
    double progress = 0.0;
    double alpha = 0.0;
    double words_per_second = 0.0;
    double mean_loss = 0.0;
};
using ProgressFn = std::function<void(const ProgressInfo&)>;

struct TrainResult {
    EmbeddingMatrices matrices;
    TrainStats stats;
};

/// Latent-sense Skip-gram with negative sampling.
///
/// For each target occurrence the context window is summed once, the most
/// probable sense is picked with the constant-normaliser posterior, and that
/// single sense is trained against every context word of the window.
TrainResult train(const EncodedCorpus& corpus, std::uint64_t text_bytes, const Vocab& vocab,
                  const SenseInventory& inventory, const TrainConfig& config, const ProgressFn& progress = {},
                  double progress_interval_seconds = 2.0);

/// Reads and encodes `corpus_path` then trains.
TrainResult train(const std::filesystem::path& corpus_path, const Vocab& vocab, const SenseInventory& inventory,
                  const TrainConfig& config, const ProgressFn& progress = {}, double progress_interval_seconds = 2.0);

/// Plain word-form Skip-gram with negative sampling over the same loop and
/// update code; the trained "sense" rows are indexed by word id.
TrainResult train_skipgram(const EncodedCorpus& corpus, std::uint64_t text_bytes, const Vocab& vocab,
                           const TrainConfig& config);

}  // namespace sensegram
