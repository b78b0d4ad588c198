#pragma once

#include <string>
#include <vector>

namespace slnmt {

// Corpus-level BLEU with clipped n-gram precisions up to order 4 and the
// exp(1 - r/c) brevity penalty. Zero match counts fall back to add-one
// smoothing, flagged per order.
struct BleuReport {
    double score = 0.0;            // 0..100
    double brevity_penalty = 1.0;  // (0, 1]
    double precisions[4] = {0, 0, 0, 0};
    bool smoothed[4] = {false, false, false, false};
    long hyp_tokens = 0;
    long ref_tokens = 0;

    std::string to_json() const;
};

BleuReport corpus_bleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references);

// Dev-BLEU history and the plateau rule: stop once the best of the last
// `window` evaluations improves on the best before them by less than
// `threshold`.
struct StopState {
    double threshold = 0.2;
    int window = 4;
    std::vector<std::pair<long, double>> history;  // (step, dev BLEU)

    void record(long step, double bleu);
};

bool should_stop(const StopState& state);

}  // namespace slnmt
