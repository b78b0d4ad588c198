#pragma once

#include <cstddef>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

namespace slnmt {

// Decaying n-gram features extracted from the test-set source side. A
// feature's current weight is init_weight * decay^selected_count.
struct FeatureTable {
    struct Entry {
        double init_weight = 1.0;
        long selected_count = 0;
    };
    int n_max = 3;
    std::unordered_map<std::string, Entry> entries;

    bool has(const std::string& feature) const { return entries.count(feature) != 0; }
    double weight(const std::string& feature, double decay) const;
};

struct SelectionRanking {
    struct Item {
        std::size_t index;
        double score;  // at selection time
    };
    std::vector<Item> items;
    int n_max = 3;
    double decay = 0.5;
};

FeatureTable extract_features(const std::vector<std::string>& test_sources, int n_max);

// Distinct-feature sum of current weights, normalized by token count.
double score_sentence(const std::string& sentence, const FeatureTable& table, double decay);

// Greedy nearest-first selection with a lazy max-priority queue: a popped
// entry whose stored score is stale gets rescored and reinserted, so the
// accepted entry is always the true greedy maximum (ties to lower index).
// Selecting a sentence decays each of its distinct features once.
class Selector {
public:
    Selector(const std::vector<std::string>& corpus, FeatureTable table, double decay);

    // Appends the next k greedy picks; successive calls continue the same
    // process, so take(n) followed by take(k) equals one take(n + k).
    std::vector<SelectionRanking::Item> take(std::size_t k);

    const FeatureTable& table() const { return table_; }
    double decay() const { return decay_; }
    std::size_t remaining() const { return remaining_; }

private:
    struct HeapEntry {
        double score;
        std::size_t index;
        bool operator<(const HeapEntry& o) const {
            if (score != o.score) return score < o.score;
            return index > o.index;
        }
    };

    double rescore(std::size_t index) const;

    FeatureTable table_;
    double decay_;
    std::vector<std::vector<std::string>> features_;  // per sentence, table hits only
    std::vector<std::size_t> token_counts_;
    std::priority_queue<HeapEntry> heap_;
    std::size_t remaining_;
};

SelectionRanking select(const std::vector<std::string>& corpus, const FeatureTable& table, std::size_t n,
                        double decay);

void save_ranking(const std::string& path, const SelectionRanking& ranking);
SelectionRanking load_ranking(const std::string& path);

}  // namespace slnmt
