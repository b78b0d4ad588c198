#include "slnmt/eval.hpp"

#include <stdexcept>

namespace slnmt {

std::vector<int> source_to_ids(const std::string& raw_line, const MergeTable& merges,
                               const Vocabulary& src_vocab) {
    std::vector<int> ids = encode_tokens(src_vocab, split_ws(apply_bpe(raw_line, merges)));
    ids.push_back(Vocabulary::kEos);
    return ids;
}

std::string ids_to_text(const std::vector<int>& tokens, const Vocabulary& tgt_vocab) {
    std::vector<std::string> toks;
    toks.reserve(tokens.size());
    for (int id : tokens) {
        if (id == Vocabulary::kEos) break;
        toks.push_back(tgt_vocab.token(id));
    }
    return debpe(join_ws(toks));
}

BleuReport evaluate_model(const ModelConfig& config, const ParameterSet& params,
                          const std::vector<std::string>& raw_sources,
                          const std::vector<std::string>& raw_references, const MergeTable& merges,
                          const Vocabulary& src_vocab, const Vocabulary& tgt_vocab, int beam_width,
                          int threads) {
    if (raw_sources.empty()) throw std::invalid_argument("evaluate: empty evaluation set");
    if (raw_sources.size() != raw_references.size()) {
        throw std::invalid_argument("evaluate: " + std::to_string(raw_sources.size()) + " sources vs " +
                                    std::to_string(raw_references.size()) + " references");
    }
    std::vector<std::vector<int>> source_ids;
    source_ids.reserve(raw_sources.size());
    for (const std::string& line : raw_sources) source_ids.push_back(source_to_ids(line, merges, src_vocab));

    std::vector<Hypothesis> hyps = translate_corpus(source_ids, config, params, beam_width, threads);
    std::vector<std::string> hyp_text;
    hyp_text.reserve(hyps.size());
    for (const Hypothesis& h : hyps) hyp_text.push_back(ids_to_text(h.tokens, tgt_vocab));
    return corpus_bleu(hyp_text, raw_references);
}

}  // namespace slnmt
