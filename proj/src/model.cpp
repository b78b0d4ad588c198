#include "slnmt/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "slnmt/bleu.hpp"
#include "slnmt/bpe.hpp"

namespace slnmt {

using ad::Tape;
using ad::Tensor;
using NodeId = Tape::NodeId;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
    auto positive = [](int x, const char* name) {
        if (x <= 0) throw std::invalid_argument(std::string("model config: ") + name + " must be positive");
    };
    positive(emb_size, "emb_size");
    positive(hidden_size, "hidden_size");
    positive(enc_layers, "enc_layers");
    positive(dec_layers, "dec_layers");
    positive(max_decode_len, "max_decode_len");
    positive(batch_size, "batch_size");
    if (src_vocab < 5 || tgt_vocab < 5) {
        throw std::invalid_argument("model config: vocab sizes must cover the 4 reserved ids");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw std::invalid_argument("model config: dropout must be in [0, 1)");
    }
    if (attention != "additive") {
        throw std::invalid_argument("model config: unsupported attention type '" + attention + "'");
    }
}

std::string ModelConfig::to_kv() const {
    std::ostringstream os;
    os.precision(17);
    os << "attention=" << attention << '\n'
       << "batch_size=" << batch_size << '\n'
       << "bidirectional=" << (bidirectional ? 1 : 0) << '\n'
       << "dec_layers=" << dec_layers << '\n'
       << "dropout=" << dropout << '\n'
       << "emb_size=" << emb_size << '\n'
       << "enc_layers=" << enc_layers << '\n'
       << "hidden_size=" << hidden_size << '\n'
       << "max_decode_len=" << max_decode_len << '\n'
       << "src_vocab=" << src_vocab << '\n'
       << "tgt_vocab=" << tgt_vocab << '\n';
    return os.str();
}

ModelConfig ModelConfig::from_kv(const std::string& text) {
    ModelConfig cfg;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("model config: malformed line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "attention") cfg.attention = val;
        else if (key == "batch_size") cfg.batch_size = std::stoi(val);
        else if (key == "bidirectional") cfg.bidirectional = std::stoi(val) != 0;
        else if (key == "dec_layers") cfg.dec_layers = std::stoi(val);
        else if (key == "dropout") cfg.dropout = std::stod(val);
        else if (key == "emb_size") cfg.emb_size = std::stoi(val);
        else if (key == "enc_layers") cfg.enc_layers = std::stoi(val);
        else if (key == "hidden_size") cfg.hidden_size = std::stoi(val);
        else if (key == "max_decode_len") cfg.max_decode_len = std::stoi(val);
        else if (key == "src_vocab") cfg.src_vocab = std::stoi(val);
        else if (key == "tgt_vocab") cfg.tgt_vocab = std::stoi(val);
        else throw std::invalid_argument("model config: unknown key '" + key + "'");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

ad::Tensor& ParameterSet::add(const std::string& name, ad::Tensor t) {
    if (index_of(name) >= 0) throw std::invalid_argument("parameters: duplicate name '" + name + "'");
    names.push_back(name);
    values.push_back(std::move(t));
    return values.back();
}

int ParameterSet::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

ad::Tensor& ParameterSet::at(const std::string& name) {
    int i = index_of(name);
    if (i < 0) throw std::invalid_argument("parameters: no entry named '" + name + "'");
    return values[static_cast<std::size_t>(i)];
}

const ad::Tensor& ParameterSet::at(const std::string& name) const {
    int i = index_of(name);
    if (i < 0) throw std::invalid_argument("parameters: no entry named '" + name + "'");
    return values[static_cast<std::size_t>(i)];
}

bool ParameterSet::same_layout(const ParameterSet& o) const {
    if (names != o.names) return false;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].shape != o.values[i].shape) return false;
    }
    return true;
}

ParameterSet init_parameters(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(ad::stream_seed(seed, "init"));
    ParameterSet ps;
    const int hid = config.hidden_size;
    const int emb = config.emb_size;
    const int ann = config.annotation_dim();

    auto uniform = [&rng](std::vector<int> shape) {
        Tensor t = Tensor::zeros(std::move(shape));
        ad::fill_uniform(t, rng, -0.1, 0.1);
        return t;
    };
    // Gate layout [input; forget; output; candidate]; forget biases start at 1.
    auto cell = [&](const std::string& prefix, int in_dim) {
        ps.add(prefix + ".wx", uniform({4 * hid, in_dim}));
        ps.add(prefix + ".wh", uniform({4 * hid, hid}));
        Tensor b = uniform({4 * hid});
        for (int i = hid; i < 2 * hid; ++i) b.at(i) = 1.0;
        ps.add(prefix + ".b", std::move(b));
    };

    ps.add("src_emb", uniform({config.src_vocab, emb}));
    ps.add("tgt_emb", uniform({config.tgt_vocab, emb}));
    for (int l = 0; l < config.enc_layers; ++l) {
        const int in_dim = l == 0 ? emb : ann;
        cell("enc.l" + std::to_string(l) + ".fwd", in_dim);
        if (config.bidirectional) cell("enc.l" + std::to_string(l) + ".bwd", in_dim);
    }
    for (int l = 0; l < config.dec_layers; ++l) {
        const int in_dim = l == 0 ? emb + ann : hid;
        cell("dec.l" + std::to_string(l), in_dim);
    }
    ps.add("att.w", uniform({hid, hid}));   // projects s_{i-1}
    ps.add("att.u", uniform({ann, hid}));   // projects annotations, stored transposed
    ps.add("att.v", uniform({hid}));
    ps.add("init.w", uniform({hid, ann}));
    ps.add("init.b", uniform({hid}));
    ps.add("out.w", uniform({config.tgt_vocab, emb + hid + ann}));
    ps.add("out.b", uniform({config.tgt_vocab}));
    return ps;
}

// ---------------------------------------------------------------------------
// Graph builders shared by training, scoring and decoding
// ---------------------------------------------------------------------------

namespace {

struct CellIds {
    NodeId wx, wh, b;
};

struct NetIds {
    std::vector<NodeId> by_index;  // parallel to ParameterSet
    NodeId src_emb, tgt_emb, att_w, att_u, att_v, init_w, init_b, out_w, out_b;
    std::vector<CellIds> enc_fwd, enc_bwd, dec;
};

struct DropoutCtx {
    double rate = 0.0;
    std::mt19937_64* rng = nullptr;
};

NetIds bind_params(Tape& tp, const ParameterSet& ps, const ModelConfig& cfg, bool track) {
    NetIds net;
    net.by_index.reserve(ps.size());
    for (const Tensor& t : ps.values) net.by_index.push_back(tp.bind(&t, track));
    auto id_of = [&](const std::string& name) {
        int i = ps.index_of(name);
        if (i < 0) throw std::invalid_argument("parameters: missing entry '" + name + "'");
        return net.by_index[static_cast<std::size_t>(i)];
    };
    net.src_emb = id_of("src_emb");
    net.tgt_emb = id_of("tgt_emb");
    net.att_w = id_of("att.w");
    net.att_u = id_of("att.u");
    net.att_v = id_of("att.v");
    net.init_w = id_of("init.w");
    net.init_b = id_of("init.b");
    net.out_w = id_of("out.w");
    net.out_b = id_of("out.b");
    for (int l = 0; l < cfg.enc_layers; ++l) {
        const std::string p = "enc.l" + std::to_string(l);
        net.enc_fwd.push_back({id_of(p + ".fwd.wx"), id_of(p + ".fwd.wh"), id_of(p + ".fwd.b")});
        if (cfg.bidirectional) {
            net.enc_bwd.push_back({id_of(p + ".bwd.wx"), id_of(p + ".bwd.wh"), id_of(p + ".bwd.b")});
        }
    }
    for (int l = 0; l < cfg.dec_layers; ++l) {
        const std::string p = "dec.l" + std::to_string(l);
        net.dec.push_back({id_of(p + ".wx"), id_of(p + ".wh"), id_of(p + ".b")});
    }
    return net;
}

// Inverted-scaling mask so inference is the identity.
NodeId apply_dropout(Tape& tp, NodeId x, const DropoutCtx& drop) {
    if (drop.rate <= 0.0 || drop.rng == nullptr) return x;
    const Tensor& val = tp.value(x);
    Tensor mask = Tensor::zeros(val.shape);
    const double keep = 1.0 - drop.rate;
    for (double& m : mask.v) {
        m = ad::uniform_unit(*drop.rng) < drop.rate ? 0.0 : 1.0 / keep;
    }
    return tp.mul(x, tp.leaf(std::move(mask)));
}

struct StateIds {
    std::vector<NodeId> h;
    std::vector<NodeId> c;
};

std::pair<NodeId, NodeId> lstm_step(Tape& tp, const CellIds& cell, NodeId x, NodeId h_prev, NodeId c_prev,
                                    int hid) {
    NodeId gates = tp.add(tp.add(tp.matvec(cell.wx, x), tp.matvec(cell.wh, h_prev)), cell.b);
    NodeId i_g = tp.sigmoid(tp.slice(gates, 0, hid));
    NodeId f_g = tp.sigmoid(tp.slice(gates, hid, 2 * hid));
    NodeId o_g = tp.sigmoid(tp.slice(gates, 2 * hid, 3 * hid));
    NodeId cand = tp.tanh(tp.slice(gates, 3 * hid, 4 * hid));
    NodeId c = tp.add(tp.mul(f_g, c_prev), tp.mul(i_g, cand));
    NodeId h = tp.mul(o_g, tp.tanh(c));
    return {h, c};
}

NodeId encode_graph(Tape& tp, const NetIds& net, const ModelConfig& cfg, const std::vector<int>& ids,
                    const DropoutCtx& drop) {
    if (ids.empty()) throw std::invalid_argument("encode: empty source");
    const int hid = cfg.hidden_size;
    const std::size_t T = ids.size();
    std::vector<NodeId> layer_in(T);
    for (std::size_t j = 0; j < T; ++j) {
        layer_in[j] = apply_dropout(tp, tp.embedding(net.src_emb, ids[j]), drop);
    }
    std::vector<NodeId> layer_out(T);
    for (int l = 0; l < cfg.enc_layers; ++l) {
        std::vector<NodeId> fwd(T);
        NodeId h = tp.leaf(Tensor::zeros({hid}));
        NodeId c = tp.leaf(Tensor::zeros({hid}));
        for (std::size_t j = 0; j < T; ++j) {
            std::tie(h, c) = lstm_step(tp, net.enc_fwd[static_cast<std::size_t>(l)], layer_in[j], h, c, hid);
            fwd[j] = h;
        }
        if (cfg.bidirectional) {
            std::vector<NodeId> bwd(T);
            NodeId hb = tp.leaf(Tensor::zeros({hid}));
            NodeId cb = tp.leaf(Tensor::zeros({hid}));
            for (std::size_t j = T; j-- > 0;) {
                std::tie(hb, cb) = lstm_step(tp, net.enc_bwd[static_cast<std::size_t>(l)], layer_in[j], hb, cb, hid);
                bwd[j] = hb;
            }
            for (std::size_t j = 0; j < T; ++j) layer_out[j] = tp.concat({fwd[j], bwd[j]});
        } else {
            layer_out = fwd;
        }
        layer_in = layer_out;
    }
    return tp.stack_rows(layer_out);
}

NodeId precompute_uh(Tape& tp, const NetIds& net, NodeId annotations) {
    return tp.matmul(annotations, net.att_u);  // [T x hid]
}

// Additive attention energies and context for one step.
std::pair<NodeId, NodeId> attention_graph(Tape& tp, const NetIds& net, NodeId s_prev_top, NodeId annotations,
                                          NodeId uh) {
    NodeId ws = tp.matvec(net.att_w, s_prev_top);
    NodeId energies = tp.matvec(tp.tanh(tp.add_rowvec(uh, ws)), net.att_v);
    NodeId weights = tp.softmax(energies);
    NodeId context = tp.vecmat(weights, annotations);
    return {context, weights};
}

StateIds init_state_graph(Tape& tp, const NetIds& net, const ModelConfig& cfg, NodeId annotations) {
    StateIds st;
    NodeId mean = tp.mean_rows(annotations);
    NodeId h0 = tp.tanh(tp.add(tp.matvec(net.init_w, mean), net.init_b));
    for (int l = 0; l < cfg.dec_layers; ++l) {
        st.h.push_back(l == 0 ? h0 : tp.leaf(Tensor::zeros({cfg.hidden_size})));
        st.c.push_back(tp.leaf(Tensor::zeros({cfg.hidden_size})));
    }
    return st;
}

// One decoder step: context from the previous top-layer state, cell update,
// readout distribution over the target vocabulary.
std::pair<StateIds, NodeId> step_graph(Tape& tp, const NetIds& net, const ModelConfig& cfg, int prev_token,
                                       const StateIds& prev, NodeId annotations, NodeId uh,
                                       const DropoutCtx& drop) {
    auto [context, weights] = attention_graph(tp, net, prev.h.back(), annotations, uh);
    (void)weights;
    NodeId emb = apply_dropout(tp, tp.embedding(net.tgt_emb, prev_token), drop);
    StateIds next;
    NodeId x = tp.concat({emb, context});
    for (int l = 0; l < cfg.dec_layers; ++l) {
        auto [h, c] = lstm_step(tp, net.dec[static_cast<std::size_t>(l)], x, prev.h[static_cast<std::size_t>(l)],
                                prev.c[static_cast<std::size_t>(l)], cfg.hidden_size);
        next.h.push_back(h);
        next.c.push_back(c);
        x = h;
    }
    NodeId readout = apply_dropout(tp, tp.concat({emb, next.h.back(), context}), drop);
    NodeId logits = tp.add(tp.matvec(net.out_w, readout), net.out_b);
    return {next, tp.softmax(logits)};
}

// Per-token cross entropies for target_ids + EOS under teacher forcing.
std::vector<NodeId> forced_losses(Tape& tp, const NetIds& net, const ModelConfig& cfg,
                                  const std::vector<int>& src_ids, const std::vector<int>& tgt_ids,
                                  const DropoutCtx& drop) {
    NodeId annotations = encode_graph(tp, net, cfg, src_ids, drop);
    NodeId uh = precompute_uh(tp, net, annotations);
    StateIds state = init_state_graph(tp, net, cfg, annotations);
    std::vector<int> targets = tgt_ids;
    targets.push_back(Vocabulary::kEos);
    std::vector<NodeId> losses;
    losses.reserve(targets.size());
    int prev = Vocabulary::kBos;
    for (int target : targets) {
        auto [next, dist] = step_graph(tp, net, cfg, prev, state, annotations, uh, drop);
        losses.push_back(tp.cross_entropy(dist, target));
        state = next;
        prev = target;
    }
    return losses;
}

int argmax_allowed(const Tensor& dist) {
    int best = -1;
    double best_p = -1.0;
    for (int i = 0; i < static_cast<int>(dist.numel()); ++i) {
        if (i == Vocabulary::kPad || i == Vocabulary::kBos) continue;
        if (dist.at(i) > best_p) {
            best_p = dist.at(i);
            best = i;
        }
    }
    return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public forward ops
// ---------------------------------------------------------------------------

EncoderAnnotations encode(const std::vector<int>& source_ids, const ModelConfig& config,
                          const ParameterSet& params) {
    Tape tp;
    NetIds net = bind_params(tp, params, config, false);
    NodeId ann = encode_graph(tp, net, config, source_ids, DropoutCtx{});
    return {tp.value(ann)};
}

std::pair<ad::Tensor, ad::Tensor> attention_context(const ad::Tensor& prev_state,
                                                    const ad::Tensor& annotations,
                                                    const ModelConfig& config, const ParameterSet& params) {
    Tape tp;
    NetIds net = bind_params(tp, params, config, false);
    NodeId ann = tp.leaf(annotations);
    NodeId uh = precompute_uh(tp, net, ann);
    auto [context, weights] = attention_graph(tp, net, tp.leaf(prev_state), ann, uh);
    return {tp.value(context), tp.value(weights)};
}

DecoderState initial_decoder_state(const ad::Tensor& annotations, const ModelConfig& config,
                                   const ParameterSet& params) {
    Tape tp;
    NetIds net = bind_params(tp, params, config, false);
    StateIds st = init_state_graph(tp, net, config, tp.leaf(annotations));
    DecoderState out;
    for (std::size_t l = 0; l < st.h.size(); ++l) {
        out.h.push_back(tp.value(st.h[l]));
        out.c.push_back(tp.value(st.c[l]));
    }
    return out;
}

std::pair<DecoderState, ad::Tensor> decoder_step(int prev_token, const DecoderState& prev_state,
                                                 const ad::Tensor& annotations, const ModelConfig& config,
                                                 const ParameterSet& params) {
    if (prev_token < 0 || prev_token >= config.tgt_vocab) {
        throw std::out_of_range("decoder_step: token " + std::to_string(prev_token) +
                                " outside target vocab of " + std::to_string(config.tgt_vocab));
    }
    Tape tp;
    NetIds net = bind_params(tp, params, config, false);
    NodeId ann = tp.leaf(annotations);
    NodeId uh = precompute_uh(tp, net, ann);
    StateIds st;
    for (std::size_t l = 0; l < prev_state.h.size(); ++l) {
        st.h.push_back(tp.leaf(prev_state.h[l]));
        st.c.push_back(tp.leaf(prev_state.c[l]));
    }
    auto [next, dist] = step_graph(tp, net, config, prev_token, st, ann, uh, DropoutCtx{});
    DecoderState out;
    for (std::size_t l = 0; l < next.h.size(); ++l) {
        out.h.push_back(tp.value(next.h[l]));
        out.c.push_back(tp.value(next.c[l]));
    }
    return {out, tp.value(dist)};
}

std::vector<double> forced_log_probs(const std::vector<int>& source_ids, const std::vector<int>& target_ids,
                                     const ModelConfig& config, const ParameterSet& params) {
    Tape tp;
    NetIds net = bind_params(tp, params, config, false);
    std::vector<NodeId> losses = forced_losses(tp, net, config, source_ids, target_ids, DropoutCtx{});
    std::vector<double> lps;
    lps.reserve(losses.size());
    for (NodeId l : losses) lps.push_back(-tp.scalar(l));
    return lps;
}

double batch_loss(const std::vector<IdPair>& batch, const ModelConfig& config, const ParameterSet& params,
                  std::vector<ad::Tensor>* grads) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    Tape tp;
    NetIds net = bind_params(tp, params, config, grads != nullptr);
    std::vector<NodeId> token_losses;
    for (const IdPair& pr : batch) {
        std::vector<NodeId> ls = forced_losses(tp, net, config, pr.first, pr.second, DropoutCtx{});
        token_losses.insert(token_losses.end(), ls.begin(), ls.end());
    }
    NodeId loss = tp.scale(tp.add_n(token_losses), 1.0 / static_cast<double>(token_losses.size()));
    const double value = tp.scalar(loss);
    if (grads) {
        tp.backward(loss);
        grads->clear();
        grads->reserve(params.size());
        for (std::size_t k = 0; k < params.size(); ++k) grads->push_back(tp.grad(net.by_index[k]));
    }
    return value;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

Hypothesis translate_greedy(const std::vector<int>& source_ids, const ModelConfig& config,
                            const ParameterSet& params) {
    if (source_ids.empty()) throw std::invalid_argument("translate: empty source");
    Tape tp;
    NetIds net = bind_params(tp, params, config, false);
    NodeId annotations = encode_graph(tp, net, config, source_ids, DropoutCtx{});
    NodeId uh = precompute_uh(tp, net, annotations);
    const int max_len =
        std::min<long>(config.max_decode_len, 2 * static_cast<long>(source_ids.size()) + 5);

    Hypothesis hyp;
    StateIds state = init_state_graph(tp, net, config, annotations);
    int prev = Vocabulary::kBos;
    for (int step = 0; step < max_len; ++step) {
        auto [next, dist_id] = step_graph(tp, net, config, prev, state, annotations, uh, DropoutCtx{});
        const Tensor& dist = tp.value(dist_id);
        const int tok = argmax_allowed(dist);
        hyp.tokens.push_back(tok);
        hyp.log_probs.push_back(std::log(dist.at(tok)));
        hyp.score += hyp.log_probs.back();
        state = next;
        prev = tok;
        if (tok == Vocabulary::kEos) break;
    }
    return hyp;
}

Hypothesis translate_beam(const std::vector<int>& source_ids, const ModelConfig& config,
                          const ParameterSet& params, int width_in) {
    if (source_ids.empty()) throw std::invalid_argument("translate: empty source");
    if (width_in < 1) throw std::invalid_argument("translate: beam width must be >= 1");
    Tape tp;
    NetIds net = bind_params(tp, params, config, false);
    NodeId annotations = encode_graph(tp, net, config, source_ids, DropoutCtx{});
    NodeId uh = precompute_uh(tp, net, annotations);
    const int max_len =
        std::min<long>(config.max_decode_len, 2 * static_cast<long>(source_ids.size()) + 5);

    struct Beam {
        StateIds state;
        std::vector<int> tokens;
        std::vector<double> log_probs;
        double sum = 0.0;
    };
    std::vector<Beam> live;
    live.push_back({init_state_graph(tp, net, config, annotations), {}, {}, 0.0});
    std::vector<Beam> ended;

    for (int step = 0; step < max_len && !live.empty(); ++step) {
        struct Cand {
            double sum;
            std::size_t beam;
            int token;
            double lp;
        };
        std::vector<Cand> cands;
        std::vector<StateIds> advanced(live.size());
        for (std::size_t b = 0; b < live.size(); ++b) {
            const int prev = live[b].tokens.empty() ? Vocabulary::kBos : live[b].tokens.back();
            auto [next, dist_id] = step_graph(tp, net, config, prev, live[b].state, annotations, uh, DropoutCtx{});
            advanced[b] = next;
            const Tensor& dist = tp.value(dist_id);
            for (int t = 0; t < static_cast<int>(dist.numel()); ++t) {
                if (t == Vocabulary::kPad || t == Vocabulary::kBos) continue;
                const double lp = std::log(dist.at(t));
                cands.push_back({live[b].sum + lp, b, t, lp});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.sum != b.sum) return a.sum > b.sum;
            if (a.beam != b.beam) return a.beam < b.beam;
            return a.token < b.token;
        });
        std::vector<Beam> next_live;
        const std::size_t width = static_cast<std::size_t>(width_in);
        std::size_t taken = 0;
        for (const Cand& c : cands) {
            if (taken == width) break;
            taken += 1;
            Beam nb;
            nb.state = advanced[c.beam];
            nb.tokens = live[c.beam].tokens;
            nb.tokens.push_back(c.token);
            nb.log_probs = live[c.beam].log_probs;
            nb.log_probs.push_back(c.lp);
            nb.sum = c.sum;
            if (c.token == Vocabulary::kEos) {
                ended.push_back(std::move(nb));
            } else {
                next_live.push_back(std::move(nb));
            }
        }
        live.swap(next_live);
    }
    // Hypotheses still live at the cap ended there.
    for (Beam& b : live) ended.push_back(std::move(b));

    const Beam* best = nullptr;
    double best_norm = 0.0;
    for (const Beam& b : ended) {
        if (b.tokens.empty()) continue;
        const double norm = b.sum / static_cast<double>(b.tokens.size());
        if (best == nullptr || norm > best_norm) {
            best = &b;
            best_norm = norm;
        }
    }
    if (best == nullptr) throw std::runtime_error("translate: produced no hypothesis");
    Hypothesis hyp;
    hyp.tokens = best->tokens;
    hyp.log_probs = best->log_probs;
    hyp.score = best->sum;
    return hyp;
}

Hypothesis translate(const std::vector<int>& source_ids, const ModelConfig& config,
                     const ParameterSet& params, int beam_width) {
    if (beam_width < 1) throw std::invalid_argument("translate: beam width must be >= 1");
    return beam_width == 1 ? translate_greedy(source_ids, config, params)
                           : translate_beam(source_ids, config, params, beam_width);
}

std::vector<Hypothesis> translate_corpus(const std::vector<std::vector<int>>& sources,
                                         const ModelConfig& config, const ParameterSet& params,
                                         int beam_width, int threads) {
    std::vector<Hypothesis> out(sources.size());
    if (sources.empty()) return out;
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(sources.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < sources.size(); ++i) {
            out[i] = translate(sources[i], config, params, beam_width);
        }
        return out;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = static_cast<std::size_t>(w); i < sources.size();
                 i += static_cast<std::size_t>(workers)) {
                out[i] = translate(sources[i], config, params, beam_width);
            }
        });
    }
    for (std::thread& t : pool) t.join();
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainResult train(const std::vector<IdPair>& pairs, const ModelConfig& config, ParameterSet& params,
                  const TrainOptions& options, const EvalFn& eval) {
    if (pairs.empty()) throw std::invalid_argument("train: no parallel pairs");
    config.validate();

    ad::AdamState adam;
    adam.lr = options.learning_rate;
    std::mt19937_64 shuffle_rng(ad::stream_seed(options.seed, "shuffle"));
    std::mt19937_64 dropout_rng(ad::stream_seed(options.seed, "dropout"));
    StopState stop;
    stop.threshold = options.stop_threshold;
    stop.window = options.stop_window;

    TrainResult result;
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();

    long step = 0;
    while (step < options.max_steps) {
        step += 1;
        std::vector<const IdPair*> batch;
        batch.reserve(static_cast<std::size_t>(config.batch_size));
        for (int b = 0; b < config.batch_size; ++b) {
            if (cursor == order.size()) {
                ad::shuffle_vec(order, shuffle_rng);
                cursor = 0;
            }
            batch.push_back(&pairs[order[cursor++]]);
        }

        Tape tp;
        NetIds net = bind_params(tp, params, config, true);
        DropoutCtx drop{config.dropout, &dropout_rng};
        std::vector<NodeId> token_losses;
        for (const IdPair* pr : batch) {
            std::vector<NodeId> ls = forced_losses(tp, net, config, pr->first, pr->second, drop);
            token_losses.insert(token_losses.end(), ls.begin(), ls.end());
        }
        NodeId loss = tp.scale(tp.add_n(token_losses), 1.0 / static_cast<double>(token_losses.size()));
        const double loss_val = tp.scalar(loss);
        if (!std::isfinite(loss_val)) {
            throw std::runtime_error("train: non-finite loss at step " +
                                     std::to_string(options.step_offset + step));
        }
        tp.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(params.size());
        for (std::size_t k = 0; k < params.size(); ++k) grads.push_back(tp.grad(net.by_index[k]));
        ad::adam_step(params.values, grads, adam);
        result.last_loss = loss_val;

        if (options.eval_interval > 0 && step % options.eval_interval == 0) {
            const long global_step = options.step_offset + step;
            Checkpoint ckpt;
            ckpt.config = config;
            ckpt.params = params;
            ckpt.step = global_step;
            ckpt.meta["phase"] = options.phase;
            ckpt.meta["phase_start"] = std::to_string(options.step_offset);
            if (eval) {
                const double bleu = eval(params, global_step);
                stop.record(global_step, bleu);
                result.history.emplace_back(global_step, bleu);
                ckpt.meta["dev_bleu"] = std::to_string(bleu);
            }
            result.checkpoints.push_back(std::move(ckpt));
            if (eval && should_stop(stop)) {
                result.stopped_by_rule = true;
                break;
            }
        }
    }
    result.final_step = options.step_offset + step;
    return result;
}

TwoPhaseResult pretrain_finetune(const std::vector<IdPair>& synthetic, const std::vector<IdPair>& authentic,
                                 const ModelConfig& config, ParameterSet& params, const TrainOptions& options,
                                 const EvalFn& eval) {
    if (synthetic.empty()) throw std::invalid_argument("pretrain_finetune: no synthetic pairs");
    if (authentic.empty()) throw std::invalid_argument("pretrain_finetune: no authentic pairs");
    TwoPhaseResult out;
    TrainOptions pre = options;
    pre.phase = "pretrain";
    out.pretrain = train(synthetic, config, params, pre, eval);
    out.boundary_step = out.pretrain.final_step;
    TrainOptions fine = options;
    fine.phase = "finetune";
    fine.step_offset = out.boundary_step;  // fresh Adam moments start inside train()
    out.finetune = train(authentic, config, params, fine, eval);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[6] = {'S', 'L', 'N', 'M', 'T', '1'};

void write_u32(std::ostream& os, std::uint32_t x) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xFFu);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t x) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xFFu);
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint32_t x = 0;
    for (int i = 3; i >= 0; --i) x = (x << 8) | b[i];
    return x;
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t x = 0;
    for (int i = 7; i >= 0; --i) x = (x << 8) | b[i];
    return x;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.write(kMagic, sizeof(kMagic));
    std::string header = ckpt.config.to_kv();
    for (const auto& [k, v] : ckpt.meta) header += "meta." + k + "=" + v + "\n";
    write_u32(os, static_cast<std::uint32_t>(header.size()));
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    write_u64(os, static_cast<std::uint64_t>(ckpt.step));
    write_u32(os, static_cast<std::uint32_t>(ckpt.params.size()));
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
        const std::string& name = ckpt.params.names[i];
        const Tensor& t = ckpt.params.values[i];
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape) write_u64(os, static_cast<std::uint64_t>(d));
        for (double x : t.v) write_u64(os, std::bit_cast<std::uint64_t>(x));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    char magic[6];
    is.read(magic, 6);
    if (!is || std::memcmp(magic, kMagic, 6) != 0) {
        throw std::runtime_error(path + ": not a checkpoint file (bad magic)");
    }
    const std::uint32_t header_len = read_u32(is);
    std::string header(header_len, '\0');
    is.read(header.data(), header_len);
    if (!is) throw std::runtime_error(path + ": truncated header");

    Checkpoint ckpt;
    std::string config_text;
    std::istringstream hs(header);
    std::string line;
    while (std::getline(hs, line)) {
        if (line.rfind("meta.", 0) == 0) {
            auto eq = line.find('=');
            if (eq == std::string::npos) throw std::runtime_error(path + ": malformed meta line");
            ckpt.meta[line.substr(5, eq - 5)] = line.substr(eq + 1);
        } else if (!line.empty()) {
            config_text += line + "\n";
        }
    }
    ckpt.config = ModelConfig::from_kv(config_text);
    ckpt.step = static_cast<long>(read_u64(is));
    const std::uint32_t count = read_u32(is);
    for (std::uint32_t p = 0; p < count; ++p) {
        const std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(is);
        std::vector<int> shape;
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<int>(read_u64(is)));
            numel *= static_cast<std::size_t>(shape.back());
        }
        std::vector<double> values(numel);
        for (std::size_t i = 0; i < numel; ++i) values[i] = std::bit_cast<double>(read_u64(is));
        if (!is) throw std::runtime_error(path + ": truncated parameter record '" + name + "'");
        ckpt.params.add(name, Tensor(std::move(shape), std::move(values)));
    }
    return ckpt;
}

ParameterSet average_parameters(const std::vector<const ParameterSet*>& sets) {
    if (sets.empty()) throw std::invalid_argument("average: no parameter sets");
    for (const ParameterSet* s : sets) {
        if (!s->same_layout(*sets[0])) {
            throw std::invalid_argument("average: parameter sets have mismatched names or shapes");
        }
    }
    ParameterSet out = *sets[0];
    const long double k = static_cast<long double>(sets.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        for (std::size_t i = 0; i < out.values[p].v.size(); ++i) {
            long double acc = 0.0L;
            for (const ParameterSet* s : sets) acc += static_cast<long double>(s->values[p].v[i]);
            out.values[p].v[i] = static_cast<double>(acc / k);
        }
    }
    return out;
}

ParameterSet average_checkpoints(const std::vector<Checkpoint>& ckpts) {
    std::vector<const ParameterSet*> sets;
    sets.reserve(ckpts.size());
    for (const Checkpoint& c : ckpts) sets.push_back(&c.params);
    return average_parameters(sets);
}

}  // namespace slnmt
