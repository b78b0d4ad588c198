#include "slnmt/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "slnmt/bpe.hpp"

namespace slnmt {

namespace {

// n-grams as space-joined token runs; tokens carry no embedded spaces after
// whitespace splitting.
void count_ngrams(const std::vector<std::string>& tokens, int order,
                  std::unordered_map<std::string, long>& out) {
    if (static_cast<int>(tokens.size()) < order) return;
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int k = 1; k < order; ++k) {
            key += ' ';
            key += tokens[i + k];
        }
        out[key] += 1;
    }
}

}  // namespace

BleuReport corpus_bleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references) {
    if (hypotheses.size() != references.size()) {
        throw std::invalid_argument("corpus_bleu: " + std::to_string(hypotheses.size()) +
                                    " hypotheses vs " + std::to_string(references.size()) + " references");
    }
    if (hypotheses.empty()) throw std::invalid_argument("corpus_bleu: empty input");

    long clipped[4] = {0, 0, 0, 0};
    long totals[4] = {0, 0, 0, 0};
    BleuReport report;

    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        const std::vector<std::string> hyp = split_ws(hypotheses[s]);
        const std::vector<std::string> ref = split_ws(references[s]);
        report.hyp_tokens += static_cast<long>(hyp.size());
        report.ref_tokens += static_cast<long>(ref.size());
        for (int n = 0; n < 4; ++n) {
            std::unordered_map<std::string, long> hyp_counts;
            std::unordered_map<std::string, long> ref_counts;
            count_ngrams(hyp, n + 1, hyp_counts);
            count_ngrams(ref, n + 1, ref_counts);
            for (const auto& [gram, count] : hyp_counts) {
                totals[n] += count;
                auto it = ref_counts.find(gram);
                if (it != ref_counts.end()) clipped[n] += std::min(count, it->second);
            }
        }
    }

    double log_sum = 0.0;
    for (int n = 0; n < 4; ++n) {
        double p;
        if (clipped[n] > 0) {
            p = static_cast<double>(clipped[n]) / static_cast<double>(totals[n]);
        } else {
            p = (0.0 + 1.0) / (static_cast<double>(totals[n]) + 1.0);
            report.smoothed[n] = true;
        }
        report.precisions[n] = p;
        log_sum += 0.25 * std::log(p);
    }

    const double c = static_cast<double>(std::max(report.hyp_tokens, 1L));
    const double r = static_cast<double>(report.ref_tokens);
    report.brevity_penalty = report.hyp_tokens >= report.ref_tokens ? 1.0 : std::exp(1.0 - r / c);
    report.score = 100.0 * report.brevity_penalty * std::exp(log_sum);
    return report;
}

std::string BleuReport::to_json() const {
    std::ostringstream os;
    os.precision(15);
    os << "{\"bleu\": " << score << ", \"bp\": " << brevity_penalty << ", \"precisions\": [";
    for (int n = 0; n < 4; ++n) {
        if (n) os << ", ";
        os << precisions[n];
    }
    os << "], \"smoothed\": [";
    for (int n = 0; n < 4; ++n) {
        if (n) os << ", ";
        os << (smoothed[n] ? "true" : "false");
    }
    os << "], \"hyp_tokens\": " << hyp_tokens << ", \"ref_tokens\": " << ref_tokens << "}";
    return os.str();
}

void StopState::record(long step, double bleu) {
    if (!history.empty() && step <= history.back().first) {
        throw std::invalid_argument("stop state: step " + std::to_string(step) +
                                    " not after " + std::to_string(history.back().first));
    }
    history.emplace_back(step, bleu);
}

bool should_stop(const StopState& state) {
    if (state.history.empty()) throw std::invalid_argument("should_stop: empty history");
    const int n = static_cast<int>(state.history.size());
    if (n < state.window + 1) return false;
    double recent_best = -1.0;
    for (int i = n - state.window; i < n; ++i) recent_best = std::max(recent_best, state.history[static_cast<std::size_t>(i)].second);
    double prior_best = -1.0;
    for (int i = 0; i < n - state.window; ++i) prior_best = std::max(prior_best, state.history[static_cast<std::size_t>(i)].second);
    return recent_best - prior_best < state.threshold;
}

}  // namespace slnmt
