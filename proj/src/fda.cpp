#include "slnmt/fda.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "slnmt/bpe.hpp"

namespace slnmt {

namespace {

// Distinct n-grams of order 1..n_max in first-appearance order; summation
// order must be reproducible so rescoring is bit-stable.
std::vector<std::string> sentence_features(const std::vector<std::string>& tokens, int n_max) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (int order = 1; order <= n_max; ++order) {
        if (static_cast<int>(tokens.size()) < order) break;
        for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (int k = 1; k < order; ++k) {
                gram += ' ';
                gram += tokens[i + k];
            }
            if (seen.insert(gram).second) out.push_back(std::move(gram));
        }
    }
    return out;
}

}  // namespace

double FeatureTable::weight(const std::string& feature, double decay) const {
    auto it = entries.find(feature);
    if (it == entries.end()) return 0.0;
    return it->second.init_weight * std::pow(decay, static_cast<double>(it->second.selected_count));
}

FeatureTable extract_features(const std::vector<std::string>& test_sources, int n_max) {
    if (test_sources.empty()) throw std::invalid_argument("extract_features: empty test set");
    if (n_max < 1) throw std::invalid_argument("extract_features: n_max must be >= 1");
    FeatureTable table;
    table.n_max = n_max;
    for (const std::string& line : test_sources) {
        for (std::string& gram : sentence_features(split_ws(line), n_max)) {
            table.entries.emplace(std::move(gram), FeatureTable::Entry{});
        }
    }
    return table;
}

double score_sentence(const std::string& sentence, const FeatureTable& table, double decay) {
    const std::vector<std::string> tokens = split_ws(sentence);
    if (tokens.empty()) return 0.0;
    double sum = 0.0;
    for (const std::string& gram : sentence_features(tokens, table.n_max)) {
        sum += table.weight(gram, decay);
    }
    return sum / static_cast<double>(tokens.size());
}

Selector::Selector(const std::vector<std::string>& corpus, FeatureTable table, double decay)
    : table_(std::move(table)), decay_(decay), remaining_(corpus.size()) {
    if (!(decay > 0.0 && decay < 1.0)) {
        throw std::invalid_argument("select: decay must be in (0, 1), got " + std::to_string(decay));
    }
    features_.reserve(corpus.size());
    token_counts_.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        std::vector<std::string> tokens = split_ws(corpus[i]);
        std::vector<std::string> hits;
        for (std::string& gram : sentence_features(tokens, table_.n_max)) {
            if (table_.has(gram)) hits.push_back(std::move(gram));
        }
        token_counts_.push_back(tokens.size());
        features_.push_back(std::move(hits));
        heap_.push({rescore(i), i});
    }
}

double Selector::rescore(std::size_t index) const {
    if (token_counts_[index] == 0) return 0.0;
    double sum = 0.0;
    for (const std::string& gram : features_[index]) sum += table_.weight(gram, decay_);
    return sum / static_cast<double>(token_counts_[index]);
}

std::vector<SelectionRanking::Item> Selector::take(std::size_t k) {
    if (k > remaining_) {
        throw std::invalid_argument("select: requested " + std::to_string(k) + " sentences but only " +
                                    std::to_string(remaining_) + " remain");
    }
    std::vector<SelectionRanking::Item> picked;
    picked.reserve(k);
    while (picked.size() < k) {
        HeapEntry top = heap_.top();
        heap_.pop();
        const double current = rescore(top.index);
        if (current == top.score) {
            picked.push_back({top.index, current});
            remaining_ -= 1;
            for (const std::string& gram : features_[top.index]) {
                table_.entries.at(gram).selected_count += 1;
            }
        } else {
            heap_.push({current, top.index});
        }
    }
    return picked;
}

SelectionRanking select(const std::vector<std::string>& corpus, const FeatureTable& table, std::size_t n,
                        double decay) {
    if (n == 0 || n > corpus.size()) {
        throw std::invalid_argument("select: n=" + std::to_string(n) + " out of range for corpus of " +
                                    std::to_string(corpus.size()));
    }
    Selector sel(corpus, table, decay);
    SelectionRanking ranking;
    ranking.n_max = table.n_max;
    ranking.decay = decay;
    ranking.items = sel.take(n);
    return ranking;
}

void save_ranking(const std::string& path, const SelectionRanking& ranking) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.precision(17);
    for (std::size_t r = 0; r < ranking.items.size(); ++r) {
        os << (r + 1) << '\t' << ranking.items[r].index << '\t' << ranking.items[r].score << '\n';
    }
}

SelectionRanking load_ranking(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    SelectionRanking ranking;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::size_t rank = 0, index = 0;
        double score = 0.0;
        if (!(ls >> rank >> index >> score)) {
            throw std::runtime_error(path + ": malformed ranking line '" + line + "'");
        }
        ranking.items.push_back({index, score});
    }
    return ranking;
}

}  // namespace slnmt
