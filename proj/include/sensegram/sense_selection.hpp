#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sensegram/corpus.hpp"
#include "sensegram/lexicon.hpp"
#include "sensegram/model.hpp"
#include "sensegram/rng.hpp"
#include "sensegram/vec_math.hpp"

namespace sensegram {

struct PosteriorResult {
    std::vector<double> probs;
    std::size_t selected = 0;
    /// More than one sense shared the maximal score and the pick was random.
    bool tied = false;
};

/// Sum of the context vectors of `contexts`, accumulated in double in the given order.
/// Throws UsageError("no context") for an empty span.
std::vector<double> context_sum(std::span<const WordId> contexts, const EmbeddingMatrices& matrices);
void context_sum_into(std::span<const WordId> contexts, const EmbeddingMatrices& matrices, std::span<double> out);

/// Index of the maximal score. Exact ties are broken uniformly at random and
/// consume one draw from `rng`; without a tie no randomness is used.
std::size_t argmax_random_ties(std::span<const double> scores, Rng& rng, bool* tied = nullptr);

/// Softmax of `scores` (max-subtracted) plus the argmax selection.
PosteriorResult posterior_from_scores(std::span<const double> scores, Rng& rng);

/// Posterior over the senses of `word` treating the softmax normaliser as
/// constant across senses: softmax_k(ctx_sum . v_{s_k}). Uniform prior.
PosteriorResult posterior_approx(std::span<const double> ctx_sum, WordId word, const SenseInventory& inventory,
                                 const EmbeddingMatrices& matrices, Rng& rng);

/// Exact posterior with the full normaliser Z(s) = sum_j exp(v_{c_j} . v_s)
/// over every context word, evaluated in log space. O(|V| * K * dim); reference use only.
PosteriorResult posterior_exact(std::span<const WordId> contexts, WordId word, const SenseInventory& inventory,
                                const EmbeddingMatrices& matrices, Rng& rng);

/// Hot-path selection used by the trainer: scores into `scratch`, no exponentials.
/// Returns the 0-based sense index within the word's block.
inline std::size_t select_sense(std::span<const double> ctx_sum, const SenseBlock& block,
                                const EmbeddingMatrices& matrices, Rng& rng, std::vector<double>& scratch,
                                bool* tied = nullptr) {
    if (block.k == 1) {
        if (tied) *tied = false;
        return 0;
    }
    scratch.resize(block.k);
    for (std::uint32_t k = 0; k < block.k; ++k) scratch[k] = vec::dot(ctx_sum, matrices.sense_row(block.first + k));
    return argmax_random_ties(scratch, rng, tied);
}

}  // namespace sensegram
