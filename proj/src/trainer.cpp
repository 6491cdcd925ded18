#include "sensegram/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "sensegram/error.hpp"
#include "sensegram/sense_selection.hpp"

namespace sensegram {

void TrainConfig::validate() const {
    if (window == 0) throw UsageError("window must be positive");
    if (dim == 0) throw UsageError("dim must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw UsageError("alpha must be positive");
    if (epochs == 0) throw UsageError("epochs must be positive");
    if (min_count == 0) throw UsageError("min-count must be positive");
    if (!(subsample >= 0.0)) throw UsageError("subsample must be non-negative");
    if (workers == 0) throw UsageError("workers must be positive");
    if (max_k == 0) throw UsageError("max-k must be positive");
    if (min_alpha && !(*min_alpha >= 0.0)) throw UsageError("min-alpha must be non-negative");
    if (!(noise_power >= 0.0)) throw UsageError("noise power must be non-negative");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::snapshot() const {
    auto num = [](auto v) {
        std::ostringstream s;
        s.precision(17);
        s << v;
        return s.str();
    };
    return {
        {"window", num(window)},
        {"dim", num(dim)},
        {"alpha", num(alpha)},
        {"negatives", num(negatives)},
        {"epochs", num(epochs)},
        {"min_count", num(min_count)},
        {"subsample", num(subsample)},
        {"workers", num(workers)},
        {"seed", num(seed)},
        {"max_k", num(max_k)},
        {"dynamic_window", dynamic_window ? "true" : "false"},
        {"min_alpha", num(effective_min_alpha())},
        {"noise_power", num(noise_power)},
        {"boundary_token", corpus.boundary_token},
    };
}

NoiseTable::NoiseTable(const Vocab& vocab, double power) {
    if (vocab.empty()) throw UsageError("noise table needs a non-empty vocabulary");
    const std::size_t n = vocab.size();
    target_.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        total += target_[i] = std::pow(static_cast<double>(vocab.count(static_cast<WordId>(i))), power);
    for (auto& p : target_) p /= total;

    // Vose's alias method.
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<WordId> small, large;
    for (std::size_t i = 0; i < n; ++i) {
        scaled[i] = target_[i] * static_cast<double>(n);
        (scaled[i] < 1.0 ? small : large).push_back(static_cast<WordId>(i));
    }
    while (!small.empty() && !large.empty()) {
        const WordId s = small.back();
        small.pop_back();
        const WordId l = large.back();
        prob_[s] = scaled[s];
        alias_[s] = l;
        scaled[l] = (scaled[l] + scaled[s]) - 1.0;
        if (scaled[l] < 1.0) {
            large.pop_back();
            small.push_back(l);
        }
    }
    for (WordId i : large) prob_[i] = 1.0;
    for (WordId i : small) prob_[i] = 1.0;
}

NoiseTable build_noise_table(const Vocab& vocab, double power) { return NoiseTable(vocab, power); }

void draw_negatives(const NoiseTable& noise, WordId context, std::size_t count, Rng& rng, std::vector<WordId>& out) {
    out.clear();
    for (std::size_t d = 0; d < count; ++d) {
        for (int attempt = 0; attempt < 8; ++attempt) {
            const WordId w = noise.sample(rng);
            if (w != context) {
                out.push_back(w);
                break;
            }
        }
    }
}

double sgns_step(EmbeddingMatrices& m, SenseId sense, WordId context, const NoiseTable& noise, double alpha,
                 std::size_t negatives, Rng& rng, std::vector<WordId>& negative_scratch, std::span<float> grad,
                 bool want_loss) {
    draw_negatives(noise, context, negatives, rng, negative_scratch);
    return sgns_apply<float>(m, sense, context, negative_scratch, alpha, grad, want_loss);
}

double lr_schedule(double progress, const TrainConfig& config) noexcept {
    return std::max(config.effective_min_alpha(), config.alpha * (1.0 - progress));
}

void TrainStats::merge(const TrainStats& o) {
    words_processed += o.words_processed;
    examples += o.examples;
    pairs += o.pairs;
    tie_breaks += o.tie_breaks;
    if (updates_by_index.size() < o.updates_by_index.size()) updates_by_index.resize(o.updates_by_index.size());
    for (std::size_t i = 0; i < o.updates_by_index.size(); ++i) updates_by_index[i] += o.updates_by_index[i];
    if (sense_occurrences.size() < o.sense_occurrences.size()) sense_occurrences.resize(o.sense_occurrences.size());
    for (std::size_t i = 0; i < o.sense_occurrences.size(); ++i) sense_occurrences[i] += o.sense_occurrences[i];
    loss_sum += o.loss_sum;
    loss_samples += o.loss_samples;
}

namespace {

constexpr std::uint64_t kProgressStride = 10000;
// Loss is sampled on every 16th target occurrence.
constexpr std::uint64_t kLossStride = 16;

/// Maps a target occurrence to the sense row it trains.
struct PlainWords {
    SenseId choose(WordId target, std::span<const WordId>, const EmbeddingMatrices&, Rng&, TrainStats&) {
        return target;
    }
};

struct LatentSenses {
    const SenseInventory& inventory;
    std::vector<double> sum;
    std::vector<double> scores;

    SenseId choose(WordId target, std::span<const WordId> contexts, const EmbeddingMatrices& m, Rng& rng,
                   TrainStats& stats) {
        const auto& block = inventory.block(target);
        if (block.k == 1) return block.first;
        sum.resize(m.dim);
        context_sum_into(contexts, m, sum);
        bool tied = false;
        const auto k = select_sense(sum, block, m, rng, scores, &tied);
        if (tied) ++stats.tie_breaks;
        ++stats.updates_by_index[k];
        return block.first + static_cast<SenseId>(k);
    }
};

struct Shared {
    Shared(const EncodedCorpus& c, const Vocab& v, const TrainConfig& cfg, const NoiseTable& n,
           const std::vector<double>& d, EmbeddingMatrices& m, std::uint64_t total)
        : corpus(c), vocab(v), config(cfg), noise(n), discard(d), matrices(m), total_words(total) {}

    const EncodedCorpus& corpus;
    const Vocab& vocab;
    const TrainConfig& config;
    const NoiseTable& noise;
    const std::vector<double>& discard;
    EmbeddingMatrices& matrices;
    std::uint64_t total_words;
    std::atomic<std::uint64_t> words_done{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string error;
    const ProgressFn* progress = nullptr;
    double progress_interval = 0.0;
    std::chrono::steady_clock::time_point start{};

    void fail(std::string message) {
        std::lock_guard lock(error_mutex);
        if (!failed.exchange(true)) error = std::move(message);
    }
};

template <typename Policy>
void run_worker(Shared& shared, std::size_t worker, std::size_t first_sentence, std::size_t last_sentence,
                Policy policy, TrainStats& stats) {
    const auto& cfg = shared.config;
    auto& m = shared.matrices;
    Rng rng = Rng::for_stream(cfg.seed, worker);
    const WindowOptions window{cfg.window, cfg.dynamic_window};
    std::vector<WordId> sentence_buf, ctx_scratch, negatives;
    std::vector<float> grad(m.dim);
    double alpha = cfg.alpha;
    std::uint64_t local_words = 0, pending = 0;
    auto last_report = std::chrono::steady_clock::now();
    const bool subsampling = cfg.subsample > 0.0;

    auto publish = [&] {
        const auto done = shared.words_done.fetch_add(pending, std::memory_order_relaxed) + pending;
        pending = 0;
        const double progress = static_cast<double>(done) / static_cast<double>(shared.total_words + 1);
        alpha = lr_schedule(progress, cfg);
        if (worker == 0 && shared.progress && *shared.progress) {
            const auto now = std::chrono::steady_clock::now();
            if (std::chrono::duration<double>(now - last_report).count() >= shared.progress_interval) {
                last_report = now;
                const double elapsed = std::chrono::duration<double>(now - shared.start).count();
                (*shared.progress)({progress, alpha, elapsed > 0 ? static_cast<double>(done) / elapsed : 0.0,
                                    stats.mean_loss()});
            }
        }
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs && !shared.failed.load(std::memory_order_relaxed); ++epoch) {
        for (std::size_t s = first_sentence; s < last_sentence; ++s) {
            auto sentence = shared.corpus.sentence(s);
            std::span<const WordId> view = sentence;
            if (subsampling) {
                sentence_buf.clear();
                for (WordId id : sentence) {
                    const double p = shared.discard[id];
                    if (p > 0.0 && rng.uniform() < p) continue;
                    sentence_buf.push_back(id);
                }
                view = sentence_buf;
            }
            for_each_window(view, window, rng, ctx_scratch,
                            [&](std::size_t, WordId target, std::span<const WordId> contexts) {
                                const SenseId sense = policy.choose(target, contexts, m, rng, stats);
                                const bool want_loss = stats.examples % kLossStride == 0;
                                double loss = 0.0;
                                for (WordId c : contexts)
                                    loss += sgns_step(m, sense, c, shared.noise, alpha, cfg.negatives, rng,
                                                      negatives, grad, want_loss);
                                if (want_loss) {
                                    if (!std::isfinite(loss)) {
                                        shared.fail("non-finite loss at target '" + shared.vocab.token(target) +
                                                    "' (alpha " + std::to_string(alpha) + ")");
                                    }
                                    stats.loss_sum += loss / static_cast<double>(contexts.size());
                                    ++stats.loss_samples;
                                }
                                ++stats.examples;
                                stats.pairs += contexts.size();
                                ++stats.sense_occurrences[sense];
                            });
            local_words += sentence.size();
            pending += sentence.size();
            if (pending >= kProgressStride) {
                publish();
                if (shared.failed.load(std::memory_order_relaxed)) return;
            }
        }
    }
    if (pending) publish();
    stats.words_processed = local_words;
}

template <typename Policy, typename MakePolicy>
TrainResult train_impl(const EncodedCorpus& corpus, std::uint64_t text_bytes, const Vocab& vocab,
                       std::size_t sense_rows, EmbeddingMatrices init, const TrainConfig& config,
                       MakePolicy make_policy, std::uint32_t max_k, const ProgressFn& progress,
                       double progress_interval) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    TrainResult result;
    result.matrices = std::move(init);
    const NoiseTable noise(vocab, config.noise_power);
    const auto discard = discard_table(vocab, config.subsample);
    Shared shared(corpus, vocab, config, noise, discard, result.matrices,
                  static_cast<std::uint64_t>(corpus.ids.size()) * config.epochs);
    shared.progress = &progress;
    shared.progress_interval = progress_interval;
    shared.start = start;

    const std::size_t workers = config.workers;
    const auto bounds = shard_sentences(corpus, text_bytes, workers);
    std::vector<TrainStats> stats(workers);
    for (auto& s : stats) {
        s.updates_by_index.assign(max_k, 0);
        s.sense_occurrences.assign(sense_rows, 0);
    }
    if (workers == 1) {
        run_worker<Policy>(shared, 0, bounds[0], bounds[1], make_policy(), stats[0]);
    } else {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            threads.emplace_back([&, w] { run_worker<Policy>(shared, w, bounds[w], bounds[w + 1], make_policy(), stats[w]); });
    }
    if (shared.failed) throw DataError("training aborted: " + shared.error);
    if (!all_finite(result.matrices)) throw DataError("training aborted: non-finite parameters");

    result.stats.updates_by_index.assign(max_k, 0);
    result.stats.sense_occurrences.assign(sense_rows, 0);
    for (const auto& s : stats) result.stats.merge(s);
    result.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace

TrainResult train(const EncodedCorpus& corpus, std::uint64_t text_bytes, const Vocab& vocab,
                  const SenseInventory& inventory, const TrainConfig& config, const ProgressFn& progress,
                  double progress_interval_seconds) {
    if (inventory.word_count() != vocab.size()) throw UsageError("inventory does not match vocabulary");
    std::uint32_t max_k = 1;
    for (std::size_t w = 0; w < inventory.word_count(); ++w)
        max_k = std::max(max_k, inventory.senses_of(static_cast<WordId>(w)));
    return train_impl<LatentSenses>(
        corpus, text_bytes, vocab, inventory.total_senses(), init_model(vocab, inventory, config.dim, config.seed),
        config, [&] { return LatentSenses{inventory, {}, {}}; }, max_k, progress, progress_interval_seconds);
}

TrainResult train(const std::filesystem::path& corpus_path, const Vocab& vocab, const SenseInventory& inventory,
                  const TrainConfig& config, const ProgressFn& progress, double progress_interval_seconds) {
    const auto text = read_file(corpus_path);
    const auto corpus = encode_text(text, vocab, config.corpus);
    return train(corpus, text.size(), vocab, inventory, config, progress, progress_interval_seconds);
}

TrainResult train_skipgram(const EncodedCorpus& corpus, std::uint64_t text_bytes, const Vocab& vocab,
                           const TrainConfig& config) {
    const auto words = SenseInventory::monosemic(vocab);
    return train_impl<PlainWords>(corpus, text_bytes, vocab, vocab.size(),
                                  init_model(vocab, words, config.dim, config.seed), config,
                                  [] { return PlainWords{}; }, 1, {}, 0.0);
}

}  // namespace sensegram
