#include "slnmt/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace slnmt {

namespace {

constexpr const char* kEow = "</w>";
constexpr const char* kCont = "@@";

const char* kReserved[4] = {"<pad>", "<s>", "</s>", "<unk>"};

// Split a word into UTF-8 codepoints so multibyte characters stay whole.
std::vector<std::string> utf8_chars(const std::string& word) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < word.size()) {
        std::size_t len = 1;
        const unsigned char c = static_cast<unsigned char>(word[i]);
        if ((c & 0x80u) != 0) {
            while (i + len < word.size() &&
                   (static_cast<unsigned char>(word[i + len]) & 0xC0u) == 0x80u) {
                ++len;
            }
        }
        out.push_back(word.substr(i, len));
        i += len;
    }
    return out;
}

std::vector<std::string> word_symbols(const std::string& word) {
    std::vector<std::string> symbols = utf8_chars(word);
    symbols.push_back(kEow);
    return symbols;
}

// One left-to-right non-overlapping pass fusing (left, right).
void merge_in_word(std::vector<std::string>& symbols, const std::string& left, const std::string& right) {
    std::vector<std::string> out;
    out.reserve(symbols.size());
    std::size_t i = 0;
    while (i < symbols.size()) {
        if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
            out.push_back(left + right);
            i += 2;
        } else {
            out.push_back(symbols[i]);
            ++i;
        }
    }
    symbols.swap(out);
}

std::string pair_key(const std::string& left, const std::string& right) {
    return left + ' ' + right;
}

// Symbols never contain spaces, so "left right" is an unambiguous key.
struct MergeRanks {
    std::unordered_map<std::string, int> rank;

    explicit MergeRanks(const MergeTable& merges) {
        rank.reserve(merges.size());
        for (std::size_t i = 0; i < merges.size(); ++i) {
            rank.emplace(pair_key(merges.merges[i].first, merges.merges[i].second), static_cast<int>(i));
        }
    }
};

// Repeatedly fuse the lowest-ranked pair present; equivalent to applying the
// table in learning order because a merge can only create pairs learned later.
std::vector<std::string> apply_to_symbols(std::vector<std::string> symbols, const MergeTable& merges,
                                          const MergeRanks& ranks) {
    while (symbols.size() >= 2) {
        int best_rank = -1;
        for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
            auto it = ranks.rank.find(pair_key(symbols[i], symbols[i + 1]));
            if (it != ranks.rank.end() && (best_rank < 0 || it->second < best_rank)) {
                best_rank = it->second;
            }
        }
        if (best_rank < 0) break;
        merge_in_word(symbols, merges.merges[static_cast<std::size_t>(best_rank)].first,
                      merges.merges[static_cast<std::size_t>(best_rank)].second);
    }
    return symbols;
}

// Drop the end-of-word marker and attach "@@" to the non-final pieces.
std::vector<std::string> externalize(std::vector<std::string> symbols) {
    if (!symbols.empty() && symbols.back() == kEow) {
        symbols.pop_back();
    } else if (!symbols.empty()) {
        std::string& last = symbols.back();
        const std::string eow = kEow;
        if (last.size() >= eow.size() && last.compare(last.size() - eow.size(), eow.size(), eow) == 0) {
            last.erase(last.size() - eow.size());
        }
    }
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) symbols[i] += kCont;
    return symbols;
}

struct WordEntry {
    std::vector<std::string> symbols;
    long count = 0;
};

}  // namespace

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::string join_ws(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

MergeTable learn_bpe(const std::vector<std::string>& corpus, int num_merges) {
    if (corpus.empty()) throw std::invalid_argument("learn_bpe: empty corpus");
    if (num_merges < 0) throw std::invalid_argument("learn_bpe: negative merge count");

    std::unordered_map<std::string, long> word_counts;
    for (const std::string& line : corpus) {
        for (const std::string& w : split_ws(line)) word_counts[w] += 1;
    }
    std::vector<WordEntry> words;
    words.reserve(word_counts.size());
    for (const auto& [word, count] : word_counts) {
        words.push_back({word_symbols(word), count});
    }

    MergeTable table;
    for (int step = 0; step < num_merges; ++step) {
        std::unordered_map<std::string, long> pair_counts;
        std::unordered_map<std::string, std::pair<std::string, std::string>> pair_syms;
        for (const WordEntry& we : words) {
            for (std::size_t i = 0; i + 1 < we.symbols.size(); ++i) {
                std::string key = pair_key(we.symbols[i], we.symbols[i + 1]);
                pair_counts[key] += we.count;
                pair_syms.emplace(std::move(key), std::make_pair(we.symbols[i], we.symbols[i + 1]));
            }
        }
        long best_count = 0;
        std::pair<std::string, std::string> best;
        bool found = false;
        for (const auto& [key, count] : pair_counts) {
            const auto& p = pair_syms.at(key);
            if (!found || count > best_count || (count == best_count && p < best)) {
                best_count = count;
                best = p;
                found = true;
            }
        }
        if (!found || best_count < 2) break;
        table.merges.push_back(best);
        for (WordEntry& we : words) merge_in_word(we.symbols, best.first, best.second);
    }
    return table;
}

std::string apply_bpe(const std::string& sentence, const MergeTable& merges) {
    MergeRanks ranks(merges);
    std::vector<std::string> out;
    for (const std::string& word : split_ws(sentence)) {
        for (std::string& tok : externalize(apply_to_symbols(word_symbols(word), merges, ranks))) {
            out.push_back(std::move(tok));
        }
    }
    return join_ws(out);
}

std::vector<std::string> apply_bpe_corpus(const std::vector<std::string>& corpus, const MergeTable& merges) {
    MergeRanks ranks(merges);
    std::unordered_map<std::string, std::vector<std::string>> cache;
    std::vector<std::string> out;
    out.reserve(corpus.size());
    for (const std::string& line : corpus) {
        std::vector<std::string> toks;
        for (const std::string& word : split_ws(line)) {
            auto it = cache.find(word);
            if (it == cache.end()) {
                it = cache.emplace(word, externalize(apply_to_symbols(word_symbols(word), merges, ranks))).first;
            }
            toks.insert(toks.end(), it->second.begin(), it->second.end());
        }
        out.push_back(join_ws(toks));
    }
    return out;
}

std::string debpe(const std::string& tokens) {
    std::string out;
    bool continue_word = false;
    for (const std::string& tok : split_ws(tokens)) {
        if (!continue_word && !out.empty()) out += ' ';
        if (tok.size() >= 2 && tok.compare(tok.size() - 2, 2, kCont) == 0) {
            out += tok.substr(0, tok.size() - 2);
            continue_word = true;
        } else {
            out += tok;
            continue_word = false;
        }
    }
    return out;
}

int Vocabulary::id(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) {
        throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range, size " +
                                std::to_string(size()));
    }
    return id_to_token[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    v.id_to_token = tokens;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto [it, inserted] = v.token_to_id.emplace(tokens[i], static_cast<int>(i));
        if (!inserted) throw std::invalid_argument("vocabulary: duplicate token '" + tokens[i] + "'");
    }
    for (int r = 0; r < 4; ++r) {
        if (v.id_to_token.size() <= static_cast<std::size_t>(r) || v.id_to_token[static_cast<std::size_t>(r)] != kReserved[r]) {
            throw std::invalid_argument("vocabulary: reserved token " + std::string(kReserved[r]) +
                                        " missing at id " + std::to_string(r));
        }
    }
    return v;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, int max_size) {
    if (max_size < 5) {
        throw std::invalid_argument("build_vocab: max_size " + std::to_string(max_size) +
                                    " leaves no room beyond the 4 reserved tokens");
    }
    std::unordered_map<std::string, long> counts;
    for (const std::string& line : corpus) {
        for (const std::string& tok : split_ws(line)) counts[tok] += 1;
    }
    std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> tokens(kReserved, kReserved + 4);
    const std::size_t keep = static_cast<std::size_t>(max_size - 4);
    for (std::size_t i = 0; i < ranked.size() && i < keep; ++i) tokens.push_back(ranked[i].first);
    return Vocabulary::from_tokens(tokens);
}

std::vector<int> encode_tokens(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const std::string& t : tokens) ids.push_back(vocab.id(t));
    return ids;
}

std::vector<std::string> decode_ids(const Vocabulary& vocab, const std::vector<int>& ids) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(vocab.token(id));
    return out;
}

void save_merges(const std::string& path, const MergeTable& merges) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    for (const auto& [l, r] : merges.merges) os << l << ' ' << r << '\n';
}

MergeTable load_merges(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    MergeTable table;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto sp = line.find(' ');
        if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size()) {
            throw std::runtime_error(path + ": malformed merge line '" + line + "'");
        }
        table.merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
    }
    return table;
}

void save_vocab(const std::string& path, const Vocabulary& vocab) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    for (const std::string& tok : vocab.id_to_token) os << tok << '\n';
}

Vocabulary load_vocab(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(is, line)) tokens.push_back(line);
    while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
    return Vocabulary::from_tokens(tokens);
}

}  // namespace slnmt
