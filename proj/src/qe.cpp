#include "slnmt/qe.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "slnmt/eval.hpp"

namespace slnmt {

ScoredTranslation scored_from_log_probs(std::string source, std::string target,
                                        std::vector<double> log_probs) {
    if (log_probs.empty()) throw std::invalid_argument("qe: no token log probabilities");
    ScoredTranslation st;
    st.source = std::move(source);
    st.target = std::move(target);
    st.confidence =
        std::accumulate(log_probs.begin(), log_probs.end(), 0.0) / static_cast<double>(log_probs.size());
    st.log_probs = std::move(log_probs);
    return st;
}

ConfidenceEstimator::ConfidenceEstimator(const ModelConfig& config, const ParameterSet& params,
                                         const MergeTable& merges, const Vocabulary& src_vocab,
                                         const Vocabulary& tgt_vocab)
    : config_(config), params_(params), merges_(merges), src_vocab_(src_vocab), tgt_vocab_(tgt_vocab) {}

ScoredTranslation ConfidenceEstimator::score(const std::string& source, const std::string& target) const {
    if (split_ws(target).empty()) throw std::invalid_argument("qe: empty target for source '" + source + "'");
    const std::vector<int> src_ids = source_to_ids(source, merges_, src_vocab_);
    const std::vector<int> tgt_ids = encode_tokens(tgt_vocab_, split_ws(apply_bpe(target, merges_)));
    std::vector<double> lps = forced_log_probs(src_ids, tgt_ids, config_, params_);
    return scored_from_log_probs(source, target, std::move(lps));
}

std::vector<std::size_t> select_best_indices(const std::vector<ScoredTranslation>& pairs, std::size_t m) {
    if (m == 0 || m > pairs.size()) {
        throw std::invalid_argument("select_best: m=" + std::to_string(m) + " out of range for " +
                                    std::to_string(pairs.size()) + " pairs");
    }
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&pairs](std::size_t a, std::size_t b) {
        if (pairs[a].confidence != pairs[b].confidence) return pairs[a].confidence > pairs[b].confidence;
        return a < b;
    });
    order.resize(m);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<ScoredTranslation> select_best(const std::vector<ScoredTranslation>& pairs, std::size_t m) {
    std::vector<ScoredTranslation> out;
    out.reserve(m);
    for (std::size_t i : select_best_indices(pairs, m)) out.push_back(pairs[i]);
    return out;
}

std::vector<ScoredTranslation> score_corpus(const QualityEstimator& qe,
                                            const std::vector<std::string>& sources,
                                            const std::vector<std::string>& targets, int threads) {
    if (sources.size() != targets.size()) {
        throw std::invalid_argument("qe: " + std::to_string(sources.size()) + " sources vs " +
                                    std::to_string(targets.size()) + " targets");
    }
    std::vector<ScoredTranslation> out(sources.size());
    if (sources.empty()) return out;
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(sources.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < sources.size(); ++i) out[i] = qe.score(sources[i], targets[i]);
        return out;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = static_cast<std::size_t>(w); i < sources.size();
                 i += static_cast<std::size_t>(workers)) {
                out[i] = qe.score(sources[i], targets[i]);
            }
        });
    }
    for (std::thread& t : pool) t.join();
    return out;
}

void save_scores(const std::string& path, const std::vector<ScoredTranslation>& pairs) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.precision(17);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        os << i << '\t' << pairs[i].confidence << '\t' << pairs[i].target << '\n';
    }
}

}  // namespace slnmt
