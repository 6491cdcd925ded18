#include "sensegram/cli.hpp"

#include <CLI11.hpp>
#include <cctype>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "sensegram/corpus.hpp"
#include "sensegram/error.hpp"
#include "sensegram/eval.hpp"
#include "sensegram/lexicon.hpp"
#include "sensegram/model.hpp"
#include "sensegram/query.hpp"
#include "sensegram/sense_selection.hpp"
#include "sensegram/trainer.hpp"

namespace sensegram::cli {

namespace {

using nlohmann::json;

std::string env_name(std::string_view flag) {
    std::string out = "SENSEGRAM_";
    for (char c : flag.substr(flag.find_first_not_of('-'))) out += c == '-' ? '_' : static_cast<char>(std::toupper(c));
    return out;
}

template <typename T>
std::string show(const T& v) {
    if constexpr (std::is_same_v<T, bool>) {
        return v ? "true" : "false";
    } else if constexpr (std::is_floating_point_v<T>) {
        std::ostringstream s;
        s << std::setprecision(17) << v;
        return s.str();
    } else if constexpr (std::is_same_v<T, std::string>) {
        return v;
    } else {
        return std::to_string(v);
    }
}

/// Options of one subcommand, bound to variables and mirrored by SENSEGRAM_* variables.
class Settings {
public:
    explicit Settings(CLI::App* app) : app_(app) {}

    template <typename T>
    CLI::Option* option(const std::string& flag, T& var, const std::string& help) {
        const auto env = env_name(flag);
        dump_.emplace_back(env, [&var] { return show(var); });
        return app_->add_option(flag, var, help)->envname(env)->capture_default_str();
    }

    CLI::Option* flag(const std::string& flag, bool& var, const std::string& help) {
        const auto env = env_name(flag);
        dump_.emplace_back(env, [&var] { return show(var); });
        return app_->add_flag(flag, var, help)->envname(env);
    }

    void dump(std::ostream& out) const {
        for (const auto& [env, get] : dump_) out << env << '=' << get() << '\n';
    }

    CLI::App* app() const noexcept { return app_; }

private:
    CLI::App* app_;
    std::vector<std::pair<std::string, std::function<std::string()>>> dump_;
};

struct Context {
    std::ostream& out;
    std::ostream& err;
};

VectorFormat require_format(const std::string& name) {
    auto f = parse_vector_format(name);
    if (!f) throw UsageError("--format must be 'text' or 'binary', got '" + name + "'");
    return *f;
}

std::vector<std::string> split_labels(const std::string& list) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(list);
    while (std::getline(in, cur, ','))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

struct BuildVocabArgs {
    std::string corpus, out, boundary;
    std::uint64_t min_count = 5;
};

int cmd_build_vocab(const BuildVocabArgs& a, Context& ctx) {
    const auto text = read_file(a.corpus);
    const auto vocab = build_vocab_from_text(text, a.min_count, {a.boundary});
    vocab.save(a.out);
    ctx.err << "vocabulary: " << vocab.size() << " types, " << vocab.total_tokens() << " tokens\n";
    return 0;
}

struct TrainArgs {
    std::string corpus, lexicon, out, format = "binary", boundary, stats;
    TrainConfig config;
    bool fixed_window = false;
    bool baseline = false;
    double min_alpha = -1.0;
    double progress_interval = 5.0;
};

int cmd_train(TrainArgs& a, Context& ctx) {
    auto& cfg = a.config;
    cfg.dynamic_window = !a.fixed_window;
    cfg.corpus.boundary_token = a.boundary;
    if (a.min_alpha >= 0.0) cfg.min_alpha = a.min_alpha;
    const auto format = require_format(a.format);
    cfg.validate();

    const auto text = read_file(a.corpus);
    const auto vocab = build_vocab_from_text(text, cfg.min_count, cfg.corpus);
    SenseInventory inventory;
    if (a.baseline) {
        inventory = SenseInventory::monosemic(vocab);
    } else {
        SenseCounts counts;
        if (!a.lexicon.empty()) counts = load_sense_counts(a.lexicon);
        inventory = build_sense_inventory(vocab, counts, cfg.max_k);
        if (counts.duplicates) ctx.err << "lexicon: " << counts.duplicates << " duplicate entries (last wins)\n";
        if (inventory.ignored_entries())
            ctx.err << "lexicon: " << inventory.ignored_entries() << " entries not in the vocabulary\n";
    }
    ctx.err << "vocabulary " << vocab.size() << " words, " << inventory.total_senses() << " senses ("
            << inventory.polysemic_words() << " polysemic)\n";
    const auto corpus = encode_text(text, vocab, cfg.corpus);
    auto progress = [&](const ProgressInfo& p) {
        ctx.err << std::fixed << std::setprecision(1) << "progress " << 100.0 * p.progress << "%  words/s "
                << std::setprecision(0) << p.words_per_second << "  alpha " << std::setprecision(6) << p.alpha
                << "  loss " << std::setprecision(4) << p.mean_loss << '\n'
                << std::defaultfloat;
    };
    auto result = train(corpus, text.size(), vocab, inventory, cfg, progress, a.progress_interval);

    ModelHeader header;
    header.dim = cfg.dim;
    header.vocab_size = vocab.size();
    header.sense_count = inventory.total_senses();
    header.seed = cfg.seed;
    header.config = cfg.snapshot();
    header.config.emplace_back("baseline", a.baseline ? "true" : "false");
    save_checkpoint(a.out, header, vocab, inventory, result.matrices, format);

    const auto& s = result.stats;
    ctx.err << "trained " << s.words_processed << " words, " << s.examples << " targets, " << s.pairs
            << " pairs in " << std::setprecision(3) << s.wall_seconds << " s; mean loss " << s.mean_loss()
            << "; tie breaks " << s.tie_breaks << '\n'
            << std::defaultfloat;
    if (!a.stats.empty()) {
        json j{{"words_processed", s.words_processed}, {"examples", s.examples}, {"pairs", s.pairs},
               {"tie_breaks", s.tie_breaks}, {"updates_by_index", s.updates_by_index},
               {"mean_loss", s.mean_loss()}, {"wall_seconds", s.wall_seconds}};
        std::ofstream f(a.stats);
        if (!f) throw DataError("cannot open '" + a.stats + "' for writing");
        f << j.dump(2) << '\n';
    }
    return 0;
}

struct NearestArgs {
    std::string model, query;
    std::size_t k = 10;
    bool include_own = false;
};

int cmd_nearest(const NearestArgs& a, Context& ctx) {
    const VectorStore store(load_vectors(a.model));
    const auto res = nearest_neighbors(a.query, a.k, store, {a.include_own});
    for (const auto& n : res.neighbors) ctx.out << n.label << '\t' << std::setprecision(6) << n.similarity << '\n';
    ctx.out << std::defaultfloat;
    return 0;
}

struct ProjectArgs {
    std::string model, labels, out, svg, metric = "euclidean";
};

int cmd_project(const ProjectArgs& a, Context& ctx) {
    auto metric = parse_metric(a.metric);
    if (!metric) throw UsageError("--metric must be 'euclidean' or 'cosine'");
    const auto labels = split_labels(a.labels);
    const VectorStore store(load_vectors(a.model));
    const auto proj = project_2d(labels, store, *metric);
    for (const auto& w : proj.warnings) ctx.err << "warning: " << w << '\n';
    write_projection_tsv(proj, a.out);
    if (!a.svg.empty()) write_projection_svg(proj, a.svg);
    return 0;
}

struct AssignArgs {
    std::string model, text, boundary;
    std::size_t window = 5;
    std::uint64_t seed = 0;
};

int cmd_senses_assign(const AssignArgs& a, Context& ctx) {
    if (a.window == 0) throw UsageError("--window must be positive");
    const auto ck = load_checkpoint(a.model);
    Rng rng(a.seed);
    std::uint64_t position = 0;
    std::vector<double> sum(ck.matrices.dim);
    for_each_sentence(a.text, {a.boundary}, [&](const std::vector<std::string_view>& sentence, std::size_t) {
        std::vector<WordId> ids;
        std::vector<std::ptrdiff_t> slot(sentence.size(), -1);
        for (std::size_t i = 0; i < sentence.size(); ++i)
            if (auto id = ck.vocab.find(sentence[i])) {
                slot[i] = static_cast<std::ptrdiff_t>(ids.size());
                ids.push_back(*id);
            }
        for (std::size_t i = 0; i < sentence.size(); ++i, ++position) {
            ctx.out << position << '\t' << sentence[i];
            if (slot[i] < 0) {
                ctx.out << "\t<oov>\n";
                continue;
            }
            const auto s = static_cast<std::size_t>(slot[i]);
            std::vector<WordId> contexts;
            for (std::size_t j = s >= a.window ? s - a.window : 0; j < std::min(ids.size(), s + a.window + 1); ++j)
                if (j != s) contexts.push_back(ids[j]);
            const auto& block = ck.inventory.block(ids[s]);
            PosteriorResult post{{1.0}, 0, false};
            if (!contexts.empty()) {
                context_sum_into(contexts, ck.matrices, sum);
                post = posterior_approx(sum, ids[s], ck.inventory, ck.matrices, rng);
            } else if (block.k > 1) {
                post.probs.assign(block.k, 1.0 / block.k);
                post.selected = static_cast<std::size_t>(rng.below(block.k));
                post.tied = true;
            }
            ctx.out << '\t' << ck.inventory.label(block.first + static_cast<SenseId>(post.selected));
            for (double p : post.probs) ctx.out << '\t' << std::setprecision(6) << p;
            ctx.out << std::defaultfloat << '\n';
        }
    });
    return 0;
}

struct SynthArgs {
    std::string spec, out, truth, lexicon_out;
    std::int64_t seed = -1;
};

int cmd_synth(const SynthArgs& a, Context& ctx) {
    auto spec = SynthSpec::load(a.spec);
    if (a.seed >= 0) spec.seed = static_cast<std::uint64_t>(a.seed);
    const auto corpus = generate_corpus(spec);
    for (const auto& w : corpus.warnings) ctx.err << "warning: " << w << '\n';
    corpus.save(a.out);
    corpus.truth.save(a.truth);
    if (!a.lexicon_out.empty()) save_synth_lexicon(spec, a.lexicon_out);
    ctx.err << "synth: " << corpus.tokens.size() << " tokens, " << corpus.sentence_ends.size() << " sentences, "
            << corpus.truth.entries.size() << " pseudoword occurrences\n";
    return 0;
}

struct EvalArgs {
    std::string model, corpus, truth, report, boundary;
    std::size_t window = 5;
    std::size_t k = 10;
    std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a, Context& ctx) {
    const auto ck = load_checkpoint(a.model);
    const auto text = read_file(a.corpus);
    const auto truth = GroundTruth::load(a.truth);
    const auto reports = score_purity(ck.vocab, ck.inventory, ck.matrices, text, truth, a.window, a.seed, {a.boundary});
    LabeledVectors lv{ck.inventory.labels(), ck.matrices.dim, ck.matrices.sense};
    const VectorStore store(std::move(lv));
    json out;
    out["pseudowords"] = json::array();
    std::uint64_t total = 0;
    double weighted = 0.0;
    for (const auto& r : reports) {
        const auto coherence = score_neighbor_coherence(store, ck.inventory, ck.vocab, r, a.k);
        json pw{{"token", r.pseudoword}, {"purity", r.purity}, {"occurrences", r.occurrences},
                {"skipped", r.skipped}, {"topics", r.topics}, {"confusion", r.confusion}};
        pw["senses"] = json::array();
        for (std::size_t s = 0; s < r.senses; ++s) {
            json neighbors = json::array();
            for (const auto& n : coherence[s].neighbors) neighbors.push_back({{"label", n.label}, {"cosine", n.similarity}});
            pw["senses"].push_back({{"label", coherence[s].label},
                                    {"matched_topic", r.matched_topic(s)},
                                    {"contribution", r.contribution(s)},
                                    {"topic_recall", r.topic_recall(r.matching[s])},
                                    {"neighbor_precision", coherence[s].precision},
                                    {"neighbors", neighbors}});
        }
        out["pseudowords"].push_back(pw);
        total += r.occurrences;
        weighted += r.purity * static_cast<double>(r.occurrences);
        ctx.err << r.pseudoword << ": purity " << r.purity << " over " << r.occurrences << " occurrences\n";
    }
    out["occurrences"] = total;
    out["purity"] = total ? weighted / static_cast<double>(total) : 0.0;
    out["window"] = a.window;
    out["k"] = a.k;
    std::ofstream f(a.report);
    if (!f) throw DataError("cannot open '" + a.report + "' for writing");
    f << out.dump(2) << '\n';
    if (!f) throw DataError("write failed for '" + a.report + "'");
    return 0;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"sensegram: sense embeddings with latent-sense skip-gram"};
    app.name(args.empty() ? "sensegram" : std::filesystem::path(args[0]).filename().string());
    app.require_subcommand(1);
    bool dump_config = false;
    app.add_flag("--dump-config", dump_config, "Print the effective settings as SENSEGRAM_* variables and exit");
    std::map<CLI::App*, std::unique_ptr<Settings>> settings;
    auto sub = [&](const char* name, const char* help) {
        auto* s = app.add_subcommand(name, help);
        return settings.emplace(s, std::make_unique<Settings>(s)).first->second.get();
    };

    BuildVocabArgs bv;
    {
        auto* s = sub("build-vocab", "Count word forms and write a vocabulary file");
        s->option("--corpus", bv.corpus, "Corpus text file")->required();
        s->option("--out", bv.out, "Vocabulary output file")->required();
        s->option("--min-count", bv.min_count, "Discard words rarer than this");
        s->option("--boundary", bv.boundary, "Extra sentence-boundary token (newline always ends a sentence)");
    }
    TrainArgs tr;
    {
        auto* s = sub("train", "Train sense vectors");
        auto& c = tr.config;
        s->option("--corpus", tr.corpus, "Corpus text file")->required();
        s->option("--lexicon", tr.lexicon, "Sense-count lexicon (token<TAB>K)");
        s->option("--out", tr.out, "Output model path")->required();
        s->option("--window", c.window, "Context window per side");
        s->option("--dim", c.dim, "Vector dimension");
        s->option("--alpha", c.alpha, "Initial learning rate");
        s->option("--min-alpha", tr.min_alpha, "Learning-rate floor (negative: 1e-4 * alpha)");
        s->option("--negatives", c.negatives, "Negative samples per context word");
        s->option("--epochs", c.epochs, "Passes over the corpus");
        s->option("--min-count", c.min_count, "Discard words rarer than this");
        s->option("--workers", c.workers, "Training threads");
        s->option("--seed", c.seed, "Random seed");
        s->flag("--fixed-window", tr.fixed_window, "Use the full window for every target");
        s->option("--subsample", c.subsample, "Frequent-word subsampling threshold (0 = off)");
        s->option("--max-k", c.max_k, "Upper bound on senses per word");
        s->flag("--baseline", tr.baseline, "Ignore the lexicon: one sense per word (plain skip-gram)");
        s->option("--format", tr.format, "Sense vector format: binary or text");
        s->option("--boundary", tr.boundary, "Extra sentence-boundary token");
        s->option("--progress-interval", tr.progress_interval, "Seconds between progress lines");
        s->option("--stats", tr.stats, "Write training statistics as JSON");
    }
    NearestArgs nn;
    {
        auto* s = sub("nearest", "Print nearest neighbours of a sense by cosine similarity");
        s->option("--model", nn.model, "Vector file (word2vec text or binary)")->required();
        s->option("--query", nn.query, "Sense label, e.g. rock-noun#2")->required();
        s->option("--k", nn.k, "Number of neighbours");
        s->flag("--include-own-senses", nn.include_own, "Also list the query word's other senses");
    }
    ProjectArgs pj;
    {
        auto* s = sub("project", "2-D classical MDS projection of selected vectors");
        s->option("--model", pj.model, "Vector file")->required();
        s->option("--labels", pj.labels, "Comma-separated labels")->required();
        s->option("--out", pj.out, "TSV output (label, x, y)")->required();
        s->option("--svg", pj.svg, "Optional SVG scatter plot");
        s->option("--metric", pj.metric, "euclidean or cosine");
    }
    AssignArgs as;
    {
        auto* s = sub("senses-assign", "Print per-token sense posteriors for a line of text");
        s->option("--model", as.model, "Model path written by train")->required();
        s->option("--text", as.text, "Tokenized text")->required();
        s->option("--window", as.window, "Context window per side");
        s->option("--seed", as.seed, "Seed for tie breaking");
        s->option("--boundary", as.boundary, "Extra sentence-boundary token");
    }
    SynthArgs sy;
    {
        auto* s = sub("synth", "Generate a synthetic topic corpus with planted pseudowords");
        s->option("--spec", sy.spec, "Spec JSON")->required();
        s->option("--out", sy.out, "Corpus output")->required();
        s->option("--truth", sy.truth, "Ground-truth TSV output (position, topic)")->required();
        s->option("--lexicon-out", sy.lexicon_out, "Write pseudoword sense counts");
        s->option("--seed", sy.seed, "Override the spec seed (negative: keep)");
    }
    EvalArgs ev;
    {
        auto* s = sub("eval", "Score sense purity and neighbour coherence against ground truth");
        s->option("--model", ev.model, "Model path written by train")->required();
        s->option("--corpus", ev.corpus, "Corpus the truth file refers to")->required();
        s->option("--truth", ev.truth, "Ground-truth TSV")->required();
        s->option("--report", ev.report, "Report JSON output")->required();
        s->option("--window", ev.window, "Context window per side for sense selection");
        s->option("--k", ev.k, "Neighbours per sense");
        s->option("--seed", ev.seed, "Seed for tie breaking");
        s->option("--boundary", ev.boundary, "Extra sentence-boundary token");
    }

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    if (argv.empty()) argv.push_back("sensegram");
    try {
        if (std::find(args.begin() + 1, args.end(), "--dump-config") != args.end()) {
            // Required options are not needed just to print settings.
            for (auto& [app_ptr, s] : settings)
                for (auto* opt : app_ptr->get_options()) opt->required(false);
        }
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }

    CLI::App* chosen = app.get_subcommands().front();
    if (dump_config) {
        settings.at(chosen)->dump(out);
        return 0;
    }
    Context ctx{out, err};
    try {
        const std::string name = chosen->get_name();
        if (name == "build-vocab") return cmd_build_vocab(bv, ctx);
        if (name == "train") return cmd_train(tr, ctx);
        if (name == "nearest") return cmd_nearest(nn, ctx);
        if (name == "project") return cmd_project(pj, ctx);
        if (name == "senses-assign") return cmd_senses_assign(as, ctx);
        if (name == "synth") return cmd_synth(sy, ctx);
        if (name == "eval") return cmd_eval(ev, ctx);
        err << "unknown subcommand '" << name << "'\n";
        return 1;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace sensegram::cli
