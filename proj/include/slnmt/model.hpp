#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "slnmt/tensor.hpp"

namespace slnmt {

// Attention encoder-decoder configuration. Desk-scale defaults; the encoder
// is bidirectional unless configured otherwise.
struct ModelConfig {
    int src_vocab = 0;
    int tgt_vocab = 0;
    int emb_size = 32;
    int hidden_size = 64;
    int enc_layers = 1;
    int dec_layers = 1;
    bool bidirectional = true;
    double dropout = 0.3;
    int max_decode_len = 200;  // hard cap; per-sentence limit is 2*len+5
    int batch_size = 64;
    std::string attention = "additive";

    int annotation_dim() const { return bidirectional ? 2 * hidden_size : hidden_size; }
    void validate() const;

    // Canonical sorted key=value block; round-trips through from_kv.
    std::string to_kv() const;
    static ModelConfig from_kv(const std::string& text);
};

// Named parameter tensors in a fixed construction order, so optimizer state,
// serialization, and averaging all walk the same sequence.
struct ParameterSet {
    std::vector<std::string> names;
    std::vector<ad::Tensor> values;

    ad::Tensor& add(const std::string& name, ad::Tensor t);
    int index_of(const std::string& name) const;  // -1 when absent
    ad::Tensor& at(const std::string& name);
    const ad::Tensor& at(const std::string& name) const;
    std::size_t size() const { return values.size(); }
    bool same_layout(const ParameterSet& o) const;
};

ParameterSet init_parameters(const ModelConfig& config, std::uint64_t seed);

struct Checkpoint {
    ModelConfig config;
    ParameterSet params;
    long step = 0;
    std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

ParameterSet average_parameters(const std::vector<const ParameterSet*>& sets);
ParameterSet average_checkpoints(const std::vector<Checkpoint>& ckpts);

// ---------------------------------------------------------------------------
// Forward math. All paths (training, forced scoring, decoding) run the same
// graph builders, so teacher forcing and forced decode agree token for token.
// ---------------------------------------------------------------------------

struct EncoderAnnotations {
    ad::Tensor h;  // [T_src x annotation_dim]
};

struct DecoderState {
    std::vector<ad::Tensor> h;  // per decoder layer
    std::vector<ad::Tensor> c;
};

struct Hypothesis {
    std::vector<int> tokens;         // ends with EOS or at the length cap
    std::vector<double> log_probs;   // one per token, <= 0
    double score = 0.0;              // sum of log_probs
};

EncoderAnnotations encode(const std::vector<int>& source_ids, const ModelConfig& config,
                          const ParameterSet& params);

// Additive attention for one decoder step: energies from the previous
// top-layer state against every annotation, softmax weights, weighted sum.
// Returns (context, weights).
std::pair<ad::Tensor, ad::Tensor> attention_context(const ad::Tensor& prev_state,
                                                    const ad::Tensor& annotations,
                                                    const ModelConfig& config, const ParameterSet& params);

DecoderState initial_decoder_state(const ad::Tensor& annotations, const ModelConfig& config,
                                   const ParameterSet& params);

// One decode step: context from prev_state, gated-cell update, next-token
// distribution. Returns (new state, distribution over target vocab).
std::pair<DecoderState, ad::Tensor> decoder_step(int prev_token, const DecoderState& prev_state,
                                                 const ad::Tensor& annotations, const ModelConfig& config,
                                                 const ParameterSet& params);

// Teacher-forced per-token log probabilities of target_ids (EOS appended)
// given source_ids. No dropout.
std::vector<double> forced_log_probs(const std::vector<int>& source_ids, const std::vector<int>& target_ids,
                                     const ModelConfig& config, const ParameterSet& params);

using IdPair = std::pair<std::vector<int>, std::vector<int>>;

// Mean teacher-forced cross entropy over a batch, without dropout. When
// grads is non-null it receives d(loss)/d(parameter) aligned with params.
double batch_loss(const std::vector<IdPair>& batch, const ModelConfig& config, const ParameterSet& params,
                  std::vector<ad::Tensor>* grads);

Hypothesis translate_greedy(const std::vector<int>& source_ids, const ModelConfig& config,
                            const ParameterSet& params);
Hypothesis translate_beam(const std::vector<int>& source_ids, const ModelConfig& config,
                          const ParameterSet& params, int width);

// width 1 dispatches to the greedy decoder; translate_beam(1) matches it
// token for token.
Hypothesis translate(const std::vector<int>& source_ids, const ModelConfig& config,
                     const ParameterSet& params, int beam_width = 1);

// Sentence-parallel batch translation; output order matches input order.
std::vector<Hypothesis> translate_corpus(const std::vector<std::vector<int>>& sources,
                                         const ModelConfig& config, const ParameterSet& params,
                                         int beam_width, int threads);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainOptions {
    double learning_rate = 2e-4;
    long max_steps = 1000;
    long eval_interval = 0;  // 0: no evaluation, run to max_steps
    double stop_threshold = 0.2;
    int stop_window = 4;
    std::uint64_t seed = 1;
    long step_offset = 0;    // cumulative numbering across phases
    std::string phase = "train";
};

// Dev evaluation hook, returns dev BLEU for the current parameters.
using EvalFn = std::function<double(const ParameterSet& params, long step)>;

struct TrainResult {
    std::vector<Checkpoint> checkpoints;            // one per evaluation
    std::vector<std::pair<long, double>> history;   // (step, dev BLEU)
    long final_step = 0;                            // includes step_offset
    double last_loss = 0.0;
    bool stopped_by_rule = false;
};

// Teacher-forced cross-entropy training with Adam; deterministic given seed.
// Aborts with a step-stamped diagnostic if the loss goes non-finite.
TrainResult train(const std::vector<IdPair>& pairs, const ModelConfig& config, ParameterSet& params,
                  const TrainOptions& options, const EvalFn& eval);

struct TwoPhaseResult {
    TrainResult pretrain;
    TrainResult finetune;
    long boundary_step = 0;
};

// Phase 1 on synthetic pairs, phase 2 on authentic pairs with the same
// parameters but fresh optimizer moments; step count is cumulative.
TwoPhaseResult pretrain_finetune(const std::vector<IdPair>& synthetic, const std::vector<IdPair>& authentic,
                                 const ModelConfig& config, ParameterSet& params, const TrainOptions& options,
                                 const EvalFn& eval);

}  // namespace slnmt
