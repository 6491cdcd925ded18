#include "sensegram/sense_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sensegram/error.hpp"

namespace sensegram {

void context_sum_into(std::span<const WordId> contexts, const EmbeddingMatrices& matrices, std::span<double> out) {
    if (contexts.empty()) throw UsageError("no context");
    std::fill(out.begin(), out.end(), 0.0);
    for (WordId c : contexts) {
        auto row = matrices.context_row(c);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += static_cast<double>(row[j]);
    }
}

std::vector<double> context_sum(std::span<const WordId> contexts, const EmbeddingMatrices& matrices) {
    std::vector<double> out(matrices.dim);
    context_sum_into(contexts, matrices, out);
    return out;
}

std::size_t argmax_random_ties(std::span<const double> scores, Rng& rng, bool* tied) {
    std::size_t best = 0;
    std::size_t ties = 1;
    for (std::size_t k = 1; k < scores.size(); ++k) {
        if (scores[k] > scores[best]) {
            best = k;
            ties = 1;
        } else if (scores[k] == scores[best]) {
            ++ties;
        }
    }
    if (tied) *tied = ties > 1;
    if (ties == 1) return best;
    // Pick the r-th tied index.
    auto r = rng.below(ties);
    const double top = scores[best];
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (scores[k] == top) {
            if (r == 0) return k;
            --r;
        }
    }
    return best;
}

PosteriorResult posterior_from_scores(std::span<const double> scores, Rng& rng) {
    PosteriorResult out;
    out.probs.resize(scores.size());
    const double top = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) z += out.probs[k] = std::exp(scores[k] - top);
    for (auto& p : out.probs) p /= z;
    out.selected = argmax_random_ties(scores, rng, &out.tied);
    return out;
}

PosteriorResult posterior_approx(std::span<const double> ctx_sum, WordId word, const SenseInventory& inventory,
                                 const EmbeddingMatrices& matrices, Rng& rng) {
    const auto& block = inventory.block(word);
    if (block.k == 1) return {{1.0}, 0, false};
    std::vector<double> scores(block.k);
    for (std::uint32_t k = 0; k < block.k; ++k) scores[k] = vec::dot(ctx_sum, matrices.sense_row(block.first + k));
    return posterior_from_scores(scores, rng);
}

PosteriorResult posterior_exact(std::span<const WordId> contexts, WordId word, const SenseInventory& inventory,
                                const EmbeddingMatrices& matrices, Rng& rng) {
    const auto& block = inventory.block(word);
    if (block.k == 1) return {{1.0}, 0, false};
    const auto sum = context_sum(contexts, matrices);
    const double n = static_cast<double>(contexts.size());
    std::vector<double> scores(block.k);
    std::vector<double> logits(matrices.context_rows());
    for (std::uint32_t k = 0; k < block.k; ++k) {
        const auto sense = matrices.sense_row(block.first + k);
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < logits.size(); ++j) {
            logits[j] = vec::dot(matrices.context_row(j), sense);
            top = std::max(top, logits[j]);
        }
        double acc = 0.0;
        for (double l : logits) acc += std::exp(l - top);
        const double log_z = top + std::log(acc);
        scores[k] = vec::dot(std::span<const double>(sum), sense) - n * log_z;
    }
    return posterior_from_scores(scores, rng);
}

}  // namespace sensegram
