#include "sensegram/lexicon.hpp"

#include <charconv>
#include <fstream>
#include <unordered_set>

#include "sensegram/error.hpp"

namespace sensegram {

SenseCounts parse_sense_counts(std::istream& in, const std::string& source) {
    SenseCounts out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto where = source + ":" + std::to_string(lineno);
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw DataError(where + ": expected token<TAB>K");
        std::string token = line.substr(0, tab);
        if (!is_valid_token(token)) throw DataError(where + ": invalid token '" + token + "'");
        std::string_view num = std::string_view(line).substr(tab + 1);
        long long k = 0;
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), k);
        if (ec != std::errc{} || ptr != num.data() + num.size())
            throw DataError(where + ": sense count '" + std::string(num) + "' is not an integer");
        if (k <= 0) throw DataError(where + ": sense count must be positive, got " + std::to_string(k));
        if (k > static_cast<long long>(UINT32_MAX)) throw DataError(where + ": sense count too large");
        auto [it, inserted] = out.counts.insert_or_assign(std::move(token), static_cast<std::uint32_t>(k));
        if (!inserted) ++out.duplicates;
    }
    return out;
}

SenseCounts load_sense_counts(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open lexicon '" + path.string() + "'");
    return parse_sense_counts(in, path.string());
}

std::string sense_label(std::string_view token, std::uint32_t index, std::uint32_t k) {
    if (k == 1) return std::string(token);
    return std::string(token) + "#" + std::to_string(index);
}

std::optional<std::pair<std::string, std::uint32_t>> split_sense_label(std::string_view label) {
    const auto hash = label.rfind('#');
    if (hash == std::string_view::npos || hash == 0 || hash + 1 == label.size()) return std::nullopt;
    std::uint32_t k = 0;
    const auto digits = label.substr(hash + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || k == 0 || digits[0] == '0') return std::nullopt;
    return std::make_pair(std::string(label.substr(0, hash)), k);
}

std::optional<SenseId> SenseInventory::find_label(std::string_view label) const {
    auto it = label_index_.find(std::string(label));
    if (it == label_index_.end()) return std::nullopt;
    return it->second;
}

void SenseInventory::finish(const Vocab& vocab) {
    words_.clear();
    labels_.clear();
    label_index_.clear();
    polysemic_ = 0;
    SenseId next = 0;
    for (std::size_t w = 0; w < blocks_.size(); ++w) {
        auto& b = blocks_[w];
        b.first = next;
        if (b.k > 1) ++polysemic_;
        for (std::uint32_t i = 1; i <= b.k; ++i) {
            words_.push_back(static_cast<WordId>(w));
            labels_.push_back(sense_label(vocab.token(static_cast<WordId>(w)), i, b.k));
            if (!label_index_.emplace(labels_.back(), next).second)
                throw DataError("sense label '" + labels_.back() + "' is ambiguous");
            ++next;
        }
    }
}

SenseInventory SenseInventory::monosemic(const Vocab& vocab) {
    SenseInventory inv;
    inv.blocks_.assign(vocab.size(), SenseBlock{0, 1});
    inv.finish(vocab);
    return inv;
}

SenseInventory build_sense_inventory(const Vocab& vocab, const SenseCounts& counts, std::uint32_t max_k) {
    if (max_k == 0) throw UsageError("max_k must be positive");
    SenseInventory inv;
    inv.blocks_.assign(vocab.size(), SenseBlock{0, 1});
    for (const auto& [token, k] : counts.counts) {
        auto id = vocab.find(token);
        if (!id) {
            ++inv.ignored_;
            continue;
        }
        inv.blocks_[*id].k = std::min(k, max_k);
    }
    inv.finish(vocab);
    return inv;
}

SenseInventory SenseInventory::from_labels(const Vocab& vocab, const std::vector<std::string>& labels) {
    SenseInventory inv;
    inv.blocks_.assign(vocab.size(), SenseBlock{0, 0});
    std::vector<bool> suffixed(vocab.size(), false);
    WordId expect = 0;
    for (const auto& label : labels) {
        // Either the bare token of the next word, or token#k continuing/starting a block.
        if (expect < vocab.size() && label == vocab.token(expect)) {
            inv.blocks_[expect++].k = 1;
            continue;
        }
        auto parts = split_sense_label(label);
        if (!parts) throw DataError("sense label '" + label + "' does not match the vocabulary");
        auto id = vocab.find(parts->first);
        if (!id) throw DataError("sense label '" + label + "' names a word missing from the vocabulary");
        auto& b = inv.blocks_[*id];
        if (b.k == 0 && *id == expect && parts->second == 1) {
            b.k = 1;
            suffixed[*id] = true;
            ++expect;
        } else if (expect > 0 && *id == expect - 1 && parts->second == b.k + 1) {
            ++b.k;
        } else {
            throw DataError("sense label '" + label + "' is out of order");
        }
    }
    if (expect != vocab.size()) throw DataError("sense labels do not cover the whole vocabulary");
    for (std::size_t w = 0; w < inv.blocks_.size(); ++w) {
        // A lone "a#1" would have been written as the bare token "a".
        if (inv.blocks_[w].k == 1 && suffixed[w])
            throw DataError("monosemic word '" + vocab.token(static_cast<WordId>(w)) + "' must use its bare label");
    }
    inv.finish(vocab);
    return inv;
}

}  // namespace sensegram
