#include "sensegram/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "sensegram/error.hpp"
#include "sensegram/rng.hpp"
#include "sensegram/sense_selection.hpp"

namespace sensegram {

using nlohmann::json;

void SynthSpec::validate() const {
    if (topics.empty()) throw UsageError("synth spec: at least one topic required");
    for (const auto& t : topics) {
        if (t.size == 0) throw UsageError("synth spec: topic size must be positive");
        if (!(t.zipf >= 0.0) || !std::isfinite(t.zipf)) throw UsageError("synth spec: zipf exponent must be >= 0");
        if (!(t.weight > 0.0) || !std::isfinite(t.weight)) throw UsageError("synth spec: topic weight must be > 0");
    }
    if (tokens == 0) throw UsageError("synth spec: tokens must be positive");
    if (min_sentence == 0 || max_sentence < min_sentence)
        throw UsageError("synth spec: need 1 <= min_sentence <= max_sentence");
    std::set<std::string> claimed;
    for (const auto& p : pseudowords) {
        if (!is_valid_token(p.token)) throw UsageError("synth spec: invalid pseudoword '" + p.token + "'");
        if (token_topic(p.token)) throw UsageError("synth spec: pseudoword '" + p.token + "' collides with a topic token");
        if (topics.size() < 2) throw UsageError("synth spec: pseudowords need at least 2 topics");
        if (p.sources.size() < 2) throw UsageError("synth spec: pseudoword '" + p.token + "' needs >= 2 sources");
        std::set<std::size_t> seen;
        for (const auto& s : p.sources) {
            auto t = token_topic(s);
            if (!t || *t >= topics.size()) throw UsageError("synth spec: source '" + s + "' is not a topic token");
            const auto rank = std::stoull(s.substr(s.find('w') + 1));
            if (rank == 0 || rank > topics[*t].size) throw UsageError("synth spec: source '" + s + "' out of range");
            if (!seen.insert(*t).second)
                throw UsageError("synth spec: sources of '" + p.token + "' must come from distinct topics");
            if (!claimed.insert(s).second) throw UsageError("synth spec: source '" + s + "' used twice");
        }
        if (!claimed.insert(p.token).second) throw UsageError("synth spec: duplicate pseudoword '" + p.token + "'");
    }
}

json SynthSpec::to_json() const {
    json j;
    j["tokens"] = tokens;
    j["seed"] = seed;
    j["sentence_length"] = {{"min", min_sentence}, {"max", max_sentence}};
    j["topics"] = json::array();
    for (const auto& t : topics) j["topics"].push_back({{"size", t.size}, {"zipf", t.zipf}, {"weight", t.weight}});
    j["pseudowords"] = json::array();
    for (const auto& p : pseudowords) j["pseudowords"].push_back({{"token", p.token}, {"sources", p.sources}});
    return j;
}

SynthSpec SynthSpec::from_json(const json& j) {
    SynthSpec s;
    try {
        for (const auto& t : j.at("topics")) {
            TopicSpec ts;
            ts.size = t.at("size").get<std::size_t>();
            ts.zipf = t.value("zipf", 1.0);
            ts.weight = t.value("weight", 1.0);
            s.topics.push_back(ts);
        }
        s.tokens = j.at("tokens").get<std::uint64_t>();
        if (j.contains("sentence_length")) {
            s.min_sentence = j["sentence_length"].value("min", s.min_sentence);
            s.max_sentence = j["sentence_length"].value("max", s.max_sentence);
        }
        if (j.contains("pseudowords"))
            for (const auto& p : j["pseudowords"])
                s.pseudowords.push_back({p.at("token").get<std::string>(), p.at("sources").get<std::vector<std::string>>()});
        s.seed = j.value("seed", s.seed);
    } catch (const json::exception& e) {
        throw DataError(std::string("synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

SynthSpec SynthSpec::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

std::string topic_token(std::size_t topic, std::size_t rank) {
    return "t" + std::to_string(topic) + "w" + std::to_string(rank) + "-nn";
}

std::optional<std::size_t> token_topic(std::string_view token) {
    // t<digits>w<digits>-nn
    if (token.size() < 6 || token[0] != 't' || !token.ends_with("-nn")) return std::nullopt;
    const auto w = token.find('w');
    if (w == std::string_view::npos || w < 2) return std::nullopt;
    std::size_t topic = 0, rank = 0;
    auto body = token.substr(0, token.size() - 3);
    auto r1 = std::from_chars(body.data() + 1, body.data() + w, topic);
    auto r2 = std::from_chars(body.data() + w + 1, body.data() + body.size(), rank);
    if (r1.ec != std::errc{} || r1.ptr != body.data() + w) return std::nullopt;
    if (r2.ec != std::errc{} || r2.ptr != body.data() + body.size() || w + 1 == body.size()) return std::nullopt;
    return topic;
}

void GroundTruth::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    for (const auto& e : entries) out << e.position << '\t' << e.topic << '\n';
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

GroundTruth GroundTruth::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open truth file '" + path.string() + "'");
    GroundTruth g;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto where = path.string() + ":" + std::to_string(lineno);
        const auto tab = line.find('\t');
        TruthEntry e;
        if (tab == std::string::npos) throw DataError(where + ": expected position<TAB>topic");
        auto a = std::from_chars(line.data(), line.data() + tab, e.position);
        auto b = std::from_chars(line.data() + tab + 1, line.data() + line.size(), e.topic);
        if (a.ec != std::errc{} || a.ptr != line.data() + tab || b.ec != std::errc{} ||
            b.ptr != line.data() + line.size())
            throw DataError(where + ": malformed entry");
        if (!g.entries.empty() && e.position <= g.entries.back().position)
            throw DataError(where + ": positions must be strictly increasing");
        g.entries.push_back(e);
    }
    return g;
}

std::string SynthCorpus::text() const {
    std::string out;
    std::size_t begin = 0;
    for (std::size_t end : sentence_ends) {
        for (std::size_t i = begin; i < end; ++i) {
            if (i > begin) out.push_back(' ');
            out += types[tokens[i]];
        }
        out.push_back('\n');
        begin = end;
    }
    return out;
}

void SynthCorpus::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    const auto t = text();
    out.write(t.data(), static_cast<std::streamsize>(t.size()));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

SynthCorpus generate_corpus(const SynthSpec& spec) {
    spec.validate();
    SynthCorpus out;
    Rng rng(spec.seed);

    // Type table: topic blocks first, pseudowords after.
    std::vector<std::uint32_t> block_start(spec.topics.size());
    std::unordered_map<std::string, std::uint32_t> type_index;
    for (std::size_t t = 0; t < spec.topics.size(); ++t) {
        block_start[t] = static_cast<std::uint32_t>(out.types.size());
        for (std::size_t r = 1; r <= spec.topics[t].size; ++r) {
            type_index.emplace(topic_token(t, r), static_cast<std::uint32_t>(out.types.size()));
            out.types.push_back(topic_token(t, r));
        }
    }
    std::vector<std::uint32_t> rewrite(out.types.size());
    std::iota(rewrite.begin(), rewrite.end(), 0u);
    std::vector<bool> is_pseudo(out.types.size(), false);
    for (const auto& p : spec.pseudowords) {
        const auto id = static_cast<std::uint32_t>(out.types.size());
        out.types.push_back(p.token);
        for (const auto& s : p.sources) {
            const auto src = type_index.at(s);
            rewrite[src] = id;
            is_pseudo[src] = true;
        }
    }

    std::vector<std::vector<double>> cdf(spec.topics.size());
    for (std::size_t t = 0; t < spec.topics.size(); ++t) {
        auto& c = cdf[t];
        c.resize(spec.topics[t].size);
        double acc = 0.0;
        for (std::size_t r = 0; r < c.size(); ++r) c[r] = acc += std::pow(static_cast<double>(r + 1), -spec.topics[t].zipf);
        for (auto& x : c) x /= acc;
    }
    std::vector<double> topic_cdf(spec.topics.size());
    {
        double acc = 0.0;
        for (std::size_t t = 0; t < spec.topics.size(); ++t) topic_cdf[t] = acc += spec.topics[t].weight;
        for (auto& x : topic_cdf) x /= acc;
    }
    auto pick = [&rng](const std::vector<double>& c) {
        const double u = rng.uniform();
        const auto it = std::upper_bound(c.begin(), c.end(), u);
        return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - c.begin(), static_cast<std::ptrdiff_t>(c.size()) - 1));
    };

    out.tokens.reserve(spec.tokens + spec.max_sentence);
    const std::size_t span = spec.max_sentence - spec.min_sentence + 1;
    while (out.tokens.size() < spec.tokens) {
        const std::size_t topic = pick(topic_cdf);
        const std::size_t len = spec.min_sentence + static_cast<std::size_t>(rng.below(span));
        for (std::size_t i = 0; i < len; ++i) {
            const auto src = block_start[topic] + static_cast<std::uint32_t>(pick(cdf[topic]));
            if (is_pseudo[src]) out.truth.entries.push_back({out.tokens.size(), topic});
            out.tokens.push_back(rewrite[src]);
        }
        out.sentence_ends.push_back(out.tokens.size());
        out.sentence_topics.push_back(topic);
    }
    if (!spec.pseudowords.empty() && out.truth.entries.empty())
        out.warnings.push_back("corpus too short: no pseudoword occurrence was generated");
    return out;
}

void save_synth_lexicon(const SynthSpec& spec, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << "# pseudoword sense counts\n";
    for (const auto& p : spec.pseudowords) out << p.token << '\t' << p.sources.size() << '\n';
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

double PurityReport::contribution(std::size_t sense) const {
    if (occurrences == 0) return 0.0;
    return static_cast<double>(confusion.at(sense).at(matching.at(sense))) / static_cast<double>(occurrences);
}

double PurityReport::topic_recall(std::size_t slot) const {
    std::uint64_t total = 0;
    for (const auto& row : confusion) total += row.at(slot);
    if (total == 0) return 0.0;
    const auto it = std::find(matching.begin(), matching.end(), slot);
    if (it == matching.end()) return 0.0;
    return static_cast<double>(confusion[static_cast<std::size_t>(it - matching.begin())][slot]) /
           static_cast<double>(total);
}

PurityReport purity_from_assignments(std::span<const SenseAssignment> assignments, std::size_t senses,
                                     std::vector<std::size_t> topics) {
    if (assignments.empty()) throw DataError("purity: no occurrences to score");
    std::sort(topics.begin(), topics.end());
    topics.erase(std::unique(topics.begin(), topics.end()), topics.end());
    if (senses != topics.size())
        throw DataError("purity: word has " + std::to_string(senses) + " senses but occurrences span " +
                        std::to_string(topics.size()) + " topics");
    if (senses > 8) throw DataError("purity: exhaustive matching supports at most 8 senses");
    PurityReport r;
    r.senses = senses;
    r.topics = topics;
    r.confusion.assign(senses, std::vector<std::uint64_t>(topics.size(), 0));
    for (const auto& a : assignments) {
        const auto slot = std::lower_bound(topics.begin(), topics.end(), a.topic);
        if (slot == topics.end() || *slot != a.topic || a.sense >= senses)
            throw DataError("purity: assignment outside the declared senses/topics");
        ++r.confusion[a.sense][static_cast<std::size_t>(slot - topics.begin())];
    }
    r.occurrences = assignments.size();
    std::vector<std::size_t> perm(senses);
    std::iota(perm.begin(), perm.end(), 0);
    std::uint64_t best = 0;
    r.matching = perm;
    do {
        std::uint64_t agree = 0;
        for (std::size_t k = 0; k < senses; ++k) agree += r.confusion[k][perm[k]];
        if (agree > best) {
            best = agree;
            r.matching = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    r.purity = static_cast<double>(best) / static_cast<double>(r.occurrences);
    return r;
}

std::vector<PurityReport> score_purity(const Vocab& vocab, const SenseInventory& inventory,
                                       const EmbeddingMatrices& matrices, std::string_view corpus_text,
                                       const GroundTruth& truth, std::size_t window, std::uint64_t seed,
                                       const CorpusOptions& options) {
    if (truth.entries.empty()) throw DataError("purity: ground truth has no occurrences");
    if (window == 0) throw UsageError("window must be positive");
    Rng rng(seed);
    struct Group {
        std::vector<SenseAssignment> assignments;
        std::vector<std::size_t> topics;
        std::uint64_t skipped = 0;
    };
    std::map<WordId, Group> groups;
    std::size_t next = 0;
    std::uint64_t position = 0;
    std::vector<WordId> ids;
    std::vector<std::ptrdiff_t> slot_of;
    std::vector<WordId> ctx;
    std::vector<double> sum(matrices.dim);
    for_each_sentence(corpus_text, options, [&](const std::vector<std::string_view>& sentence, std::size_t) {
        const std::uint64_t first = position;
        position += sentence.size();
        if (next >= truth.entries.size() || truth.entries[next].position >= position) return;
        ids.clear();
        slot_of.assign(sentence.size(), -1);
        for (std::size_t i = 0; i < sentence.size(); ++i)
            if (auto id = vocab.find(sentence[i])) {
                slot_of[i] = static_cast<std::ptrdiff_t>(ids.size());
                ids.push_back(*id);
            }
        while (next < truth.entries.size() && truth.entries[next].position < position) {
            const auto& e = truth.entries[next++];
            const auto local = static_cast<std::size_t>(e.position - first);
            const auto token = sentence[local];
            if (slot_of[local] < 0)
                throw DataError("purity: token '" + std::string(token) + "' at position " +
                                std::to_string(e.position) + " is not in the model vocabulary");
            const auto slot = static_cast<std::size_t>(slot_of[local]);
            const WordId word = ids[slot];
            if (inventory.senses_of(word) < 2)
                throw DataError("purity: token '" + std::string(token) + "' at position " +
                                std::to_string(e.position) + " has a single sense in the inventory");
            auto& g = groups[word];
            g.topics.push_back(e.topic);
            ctx.clear();
            const std::size_t begin = slot >= window ? slot - window : 0;
            const std::size_t end = std::min(ids.size(), slot + window + 1);
            for (std::size_t j = begin; j < end; ++j)
                if (j != slot) ctx.push_back(ids[j]);
            if (ctx.empty()) {
                ++g.skipped;
                continue;
            }
            context_sum_into(ctx, matrices, sum);
            const auto post = posterior_approx(sum, word, inventory, matrices, rng);
            g.assignments.push_back({post.selected, e.topic});
        }
    });
    if (next < truth.entries.size())
        throw DataError("purity: truth position " + std::to_string(truth.entries[next].position) +
                        " is beyond the end of the corpus");
    std::vector<PurityReport> out;
    for (auto& [word, g] : groups) {
        if (g.assignments.empty())
            throw DataError("purity: no scorable occurrences of '" + vocab.token(word) + "'");
        auto r = purity_from_assignments(g.assignments, inventory.senses_of(word), g.topics);
        r.pseudoword = vocab.token(word);
        r.skipped = g.skipped;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SensePrecision> score_neighbor_coherence(const VectorStore& senses, const SenseInventory& inventory,
                                                     const Vocab& vocab, const PurityReport& purity, std::size_t k) {
    auto word = vocab.find(purity.pseudoword);
    if (!word) throw DataError("coherence: '" + purity.pseudoword + "' is not in the vocabulary");
    const auto& block = inventory.block(*word);
    if (block.k != purity.senses) throw DataError("coherence: sense count disagrees with the purity report");
    const std::size_t available = senses.size() - block.k;
    k = std::min(k, available);
    std::vector<SensePrecision> out;
    for (std::uint32_t i = 0; i < block.k; ++i) {
        SensePrecision sp;
        sp.label = inventory.label(block.first + i);
        sp.topic = purity.matched_topic(i);
        auto nn = nearest_neighbors(sp.label, k, senses);
        std::size_t hits = 0;
        for (const auto& n : nn.neighbors) {
            auto t = token_topic(label_word(n.label));
            if (t && *t == sp.topic) ++hits;
        }
        sp.precision = nn.neighbors.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(nn.neighbors.size());
        sp.neighbors = std::move(nn.neighbors);
        out.push_back(std::move(sp));
    }
    return out;
}

}  // namespace sensegram
