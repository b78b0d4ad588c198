#pragma once

#include <string>
#include <vector>

#include "slnmt/bleu.hpp"
#include "slnmt/bpe.hpp"
#include "slnmt/model.hpp"

namespace slnmt {

// Translates every source line (BPE + encode, then greedy or beam decode),
// strips subword markers, and scores against the raw references.
BleuReport evaluate_model(const ModelConfig& config, const ParameterSet& params,
                          const std::vector<std::string>& raw_sources,
                          const std::vector<std::string>& raw_references, const MergeTable& merges,
                          const Vocabulary& src_vocab, const Vocabulary& tgt_vocab, int beam_width,
                          int threads);

// Source line -> model input ids (BPE, vocab encode, trailing EOS).
std::vector<int> source_to_ids(const std::string& raw_line, const MergeTable& merges,
                               const Vocabulary& src_vocab);

// Hypothesis ids -> detokenized text (EOS dropped, subwords rejoined).
std::string ids_to_text(const std::vector<int>& tokens, const Vocabulary& tgt_vocab);

}  // namespace slnmt
