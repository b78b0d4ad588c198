#pragma once

#include <memory>
#include <string>
#include <vector>

#include "slnmt/bpe.hpp"
#include "slnmt/model.hpp"

namespace slnmt {

// A synthetic pair with its intrinsic confidence: the mean per-token forced-
// decode log probability (nats per token, EOS included).
struct ScoredTranslation {
    std::string source;
    std::string target;
    std::vector<double> log_probs;
    double confidence = 0.0;
};

// Pluggable sentence-level estimator so other scorers can replace the
// decoder-confidence default.
class QualityEstimator {
public:
    virtual ~QualityEstimator() = default;
    virtual ScoredTranslation score(const std::string& source, const std::string& target) const = 0;
};

// Forced-decodes the target under the model and averages the token log
// probabilities. Sources and targets are raw text; BPE and vocab lookups
// happen inside.
class ConfidenceEstimator : public QualityEstimator {
public:
    ConfidenceEstimator(const ModelConfig& config, const ParameterSet& params, const MergeTable& merges,
                        const Vocabulary& src_vocab, const Vocabulary& tgt_vocab);

    ScoredTranslation score(const std::string& source, const std::string& target) const override;

private:
    const ModelConfig& config_;
    const ParameterSet& params_;
    const MergeTable& merges_;
    const Vocabulary& src_vocab_;
    const Vocabulary& tgt_vocab_;
};

ScoredTranslation scored_from_log_probs(std::string source, std::string target,
                                        std::vector<double> log_probs);

// Top-m by confidence, ties to the lower index; the survivors keep their
// original relative order.
std::vector<ScoredTranslation> select_best(const std::vector<ScoredTranslation>& pairs, std::size_t m);
std::vector<std::size_t> select_best_indices(const std::vector<ScoredTranslation>& pairs, std::size_t m);

// Parallel scoring of aligned source/target lists; output order matches input.
std::vector<ScoredTranslation> score_corpus(const QualityEstimator& qe,
                                            const std::vector<std::string>& sources,
                                            const std::vector<std::string>& targets, int threads);

// Audit TSV: index, confidence, target.
void save_scores(const std::string& path, const std::vector<ScoredTranslation>& pairs);

}  // namespace slnmt
