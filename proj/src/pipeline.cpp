#include "slnmt/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "slnmt/bleu.hpp"
#include "slnmt/bpe.hpp"
#include "slnmt/corpus.hpp"
#include "slnmt/eval.hpp"
#include "slnmt/fda.hpp"
#include "slnmt/qe.hpp"

namespace slnmt {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string method_name(Method m) {
    switch (m) {
        case Method::kSl: return "sl";
        case Method::kSlDs: return "sl+ds";
        case Method::kSlQe: return "sl+qe";
        case Method::kSlDsQe: return "sl+ds+qe";
    }
    throw std::logic_error("method_name: bad enum");
}

Method method_from_name(const std::string& name) {
    if (name == "sl") return Method::kSl;
    if (name == "sl+ds" || name == "sl-ds") return Method::kSlDs;
    if (name == "sl+qe" || name == "sl-qe") return Method::kSlQe;
    if (name == "sl+ds+qe" || name == "sl-ds-qe") return Method::kSlDsQe;
    throw std::invalid_argument("unknown method '" + name + "' (expected sl, sl-ds, sl-qe or sl-ds-qe)");
}

std::size_t fraction_ceil(std::size_t total, std::size_t num, std::size_t den) {
    if (den == 0) throw std::invalid_argument("fraction_ceil: zero denominator");
    return (total * num + den - 1) / den;
}

static bool uses_ds(Method m) { return m == Method::kSlDs || m == Method::kSlDsQe; }
static bool uses_qe(Method m) { return m == Method::kSlQe || m == Method::kSlDsQe; }

void ExperimentConfig::validate() const {
    if (schedule.empty()) throw std::invalid_argument("config: empty schedule");
    std::size_t prev_n = 0, prev_m = 0;
    for (const ScheduleStage& st : schedule) {
        if (st.select_n == 0) throw std::invalid_argument("config: schedule stage with n=0");
        if (st.keep_m == 0) throw std::invalid_argument("config: schedule stage with m=0");
        if (st.select_n < prev_n || st.keep_m < prev_m) {
            throw std::invalid_argument("config: schedule must be cumulatively non-decreasing");
        }
        if (st.select_n == prev_n) throw std::invalid_argument("config: schedule stage adds no sentences");
        if (method == Method::kSlDsQe) {
            if (st.keep_m >= st.select_n) {
                throw std::invalid_argument("config: requires n > m, got n=" + std::to_string(st.select_n) +
                                            " m=" + std::to_string(st.keep_m));
            }
        } else if (st.keep_m > st.select_n) {
            throw std::invalid_argument("config: m cannot exceed n");
        }
        if (!uses_qe(method) && st.keep_m != st.select_n) {
            throw std::invalid_argument("config: without qe every selected sentence is kept (set m=n)");
        }
        prev_n = st.select_n;
        prev_m = st.keep_m;
    }
    if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("config: decay must be in (0,1)");
    if (nmax < 1) throw std::invalid_argument("config: nmax must be >= 1");
    if (average_last < 1) throw std::invalid_argument("config: average_last must be >= 1");
    if (eval_interval < 1) throw std::invalid_argument("config: eval_interval must be >= 1");
    if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
}

ExperimentConfig ExperimentConfig::from_kv(const std::map<std::string, std::string>& kv) {
    ExperimentConfig cfg;
    cfg.raw = kv;
    std::size_t single_n = 0, single_m = 0;
    for (const auto& [key, value] : kv) {
        if (key == "train_src") cfg.train_src = value;
        else if (key == "train_tgt") cfg.train_tgt = value;
        else if (key == "mono_src") cfg.mono_src = value;
        else if (key == "dev_src") cfg.dev_src = value;
        else if (key == "dev_tgt") cfg.dev_tgt = value;
        else if (key == "test_src") cfg.test_src = value;
        else if (key == "test_tgt") cfg.test_tgt = value;
        else if (key == "method") cfg.method = method_from_name(value);
        else if (key == "bpe_merges") cfg.bpe_merges = std::stoi(value);
        else if (key == "vocab_max") cfg.vocab_max = std::stoi(value);
        else if (key == "nmax") cfg.nmax = std::stoi(value);
        else if (key == "decay") cfg.decay = std::stod(value);
        else if (key == "select_n") single_n = static_cast<std::size_t>(std::stoull(value));
        else if (key == "keep_m") single_m = static_cast<std::size_t>(std::stoull(value));
        else if (key == "schedule") {
            std::istringstream is(value);
            std::string stage;
            while (std::getline(is, stage, ',')) {
                auto colon = stage.find(':');
                if (colon == std::string::npos) {
                    throw std::invalid_argument("config: schedule stage '" + stage + "' is not n:m");
                }
                cfg.schedule.push_back({static_cast<std::size_t>(std::stoull(stage.substr(0, colon))),
                                        static_cast<std::size_t>(std::stoull(stage.substr(colon + 1)))});
            }
        } else if (key == "emb") cfg.model.emb_size = std::stoi(value);
        else if (key == "hidden") cfg.model.hidden_size = std::stoi(value);
        else if (key == "enc_layers") cfg.model.enc_layers = std::stoi(value);
        else if (key == "dec_layers") cfg.model.dec_layers = std::stoi(value);
        else if (key == "bidirectional") cfg.model.bidirectional = std::stoi(value) != 0;
        else if (key == "dropout") cfg.model.dropout = std::stod(value);
        else if (key == "batch") cfg.model.batch_size = std::stoi(value);
        else if (key == "max_decode_len") cfg.model.max_decode_len = std::stoi(value);
        else if (key == "lr") cfg.learning_rate = std::stod(value);
        else if (key == "max_steps") cfg.max_steps = std::stol(value);
        else if (key == "eval_interval") cfg.eval_interval = std::stol(value);
        else if (key == "stop_threshold") cfg.stop_threshold = std::stod(value);
        else if (key == "stop_window") cfg.stop_window = std::stoi(value);
        else if (key == "average_last") cfg.average_last = std::stoi(value);
        else if (key == "beam") cfg.eval_beam = std::stoi(value);
        else if (key == "synth_beam") cfg.synth_beam = std::stoi(value);
        else if (key == "threads") cfg.threads = std::stoi(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    if (cfg.schedule.empty() && single_n > 0) cfg.schedule.push_back({single_n, single_m > 0 ? single_m : single_n});
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_kv(load_kv_file(path));
}

// ---------------------------------------------------------------------------
// Manifest serialization
// ---------------------------------------------------------------------------

namespace {

ordered_json stage_to_json(const StageRecord& st) {
    ordered_json j;
    j["name"] = st.name;
    j["authentic_count"] = st.authentic_count;
    j["mono_count"] = st.mono_count;
    j["selected_count"] = st.selected_count;
    j["kept_count"] = st.kept_count;
    if (st.pretrain_bleu) j["pretrain_bleu"] = *st.pretrain_bleu;
    else j["pretrain_bleu"] = nullptr;
    j["finetune_bleu"] = st.finetune_bleu;
    j["best_bleu"] = st.best_bleu;
    j["best_step"] = st.best_step;
    j["final_step"] = st.final_step;
    j["checkpoints"] = st.checkpoints;
    j["hashes"] = ordered_json::object();
    for (const auto& [k, v] : st.hashes) j["hashes"][k] = v;
    j["timing"] = ordered_json{{"wall_seconds", st.wall_seconds}};
    return j;
}

StageRecord stage_from_json(const ordered_json& j) {
    StageRecord st;
    st.name = j.at("name").get<std::string>();
    st.authentic_count = j.at("authentic_count").get<std::size_t>();
    st.mono_count = j.at("mono_count").get<std::size_t>();
    st.selected_count = j.at("selected_count").get<std::size_t>();
    st.kept_count = j.at("kept_count").get<std::size_t>();
    if (!j.at("pretrain_bleu").is_null()) st.pretrain_bleu = j.at("pretrain_bleu").get<double>();
    st.finetune_bleu = j.at("finetune_bleu").get<double>();
    st.best_bleu = j.at("best_bleu").get<double>();
    st.best_step = j.at("best_step").get<long>();
    st.final_step = j.at("final_step").get<long>();
    st.checkpoints = j.at("checkpoints").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("hashes").items()) st.hashes[k] = v.get<std::string>();
    if (j.contains("timing")) st.wall_seconds = j.at("timing").value("wall_seconds", 0.0);
    return st;
}

}  // namespace

std::string RunManifest::to_json() const {
    ordered_json j;
    j["config"] = ordered_json::object();
    for (const auto& [k, v] : config) j["config"][k] = v;
    j["stages"] = ordered_json::array();
    for (const StageRecord& st : stages) j["stages"].push_back(stage_to_json(st));
    return j.dump(2) + "\n";
}

std::string RunManifest::to_json_without_timing() const {
    ordered_json j = ordered_json::parse(to_json());
    for (auto& st : j["stages"]) st.erase("timing");
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    RunManifest m;
    for (const auto& [k, v] : j.at("config").items()) m.config[k] = v.get<std::string>();
    for (const auto& st : j.at("stages")) m.stages.push_back(stage_from_json(st));
    return m;
}

void RunManifest::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << to_json();
}

RunManifest RunManifest::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_json(buf.str());
}

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

namespace {

struct Ctx {
    ExperimentConfig cfg;
    std::string out_dir;
    std::vector<std::string> train_src, train_tgt, mono, dev_src, dev_tgt, test_src, test_tgt;
    MergeTable merges;
    Vocabulary src_vocab, tgt_vocab;
    std::vector<IdPair> train_ids;
    ModelConfig model;
};

std::vector<IdPair> encode_pairs(const Ctx& ctx, const std::vector<std::string>& src,
                                 const std::vector<std::string>& tgt) {
    std::vector<std::string> src_bpe = apply_bpe_corpus(src, ctx.merges);
    std::vector<std::string> tgt_bpe = apply_bpe_corpus(tgt, ctx.merges);
    std::vector<IdPair> pairs;
    pairs.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        std::vector<int> s = encode_tokens(ctx.src_vocab, split_ws(src_bpe[i]));
        s.push_back(Vocabulary::kEos);
        pairs.emplace_back(std::move(s), encode_tokens(ctx.tgt_vocab, split_ws(tgt_bpe[i])));
    }
    return pairs;
}

Ctx prepare(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    Ctx ctx;
    ctx.cfg = cfg;
    ctx.out_dir = out_dir;
    fs::create_directories(out_dir);

    ctx.train_src = load_lines(cfg.train_src);
    ctx.train_tgt = load_lines(cfg.train_tgt);
    if (ctx.train_src.size() != ctx.train_tgt.size()) {
        throw std::runtime_error("parallel corpus mismatch: " + std::to_string(ctx.train_src.size()) +
                                 " vs " + std::to_string(ctx.train_tgt.size()) + " lines");
    }
    ctx.mono = load_lines(cfg.mono_src);
    ctx.dev_src = load_lines(cfg.dev_src);
    ctx.dev_tgt = load_lines(cfg.dev_tgt);
    ctx.test_src = load_lines(cfg.test_src);
    ctx.test_tgt = load_lines(cfg.test_tgt);

    // Joint BPE over both training sides, then per-side vocabularies.
    std::vector<std::string> joint = ctx.train_src;
    joint.insert(joint.end(), ctx.train_tgt.begin(), ctx.train_tgt.end());
    ctx.merges = learn_bpe(joint, cfg.bpe_merges);
    save_merges(out_dir + "/merges.txt", ctx.merges);

    std::vector<std::string> src_bpe = apply_bpe_corpus(ctx.train_src, ctx.merges);
    std::vector<std::string> tgt_bpe = apply_bpe_corpus(ctx.train_tgt, ctx.merges);
    ctx.src_vocab = build_vocab(src_bpe, cfg.vocab_max);
    ctx.tgt_vocab = build_vocab(tgt_bpe, cfg.vocab_max);
    save_vocab(out_dir + "/vocab.src.txt", ctx.src_vocab);
    save_vocab(out_dir + "/vocab.tgt.txt", ctx.tgt_vocab);

    ctx.model = cfg.model;
    ctx.model.src_vocab = ctx.src_vocab.size();
    ctx.model.tgt_vocab = ctx.tgt_vocab.size();
    ctx.model.validate();

    ctx.train_ids.reserve(ctx.train_src.size());
    for (std::size_t i = 0; i < ctx.train_src.size(); ++i) {
        std::vector<int> s = encode_tokens(ctx.src_vocab, split_ws(src_bpe[i]));
        s.push_back(Vocabulary::kEos);
        ctx.train_ids.emplace_back(std::move(s), encode_tokens(ctx.tgt_vocab, split_ws(tgt_bpe[i])));
    }
    return ctx;
}

EvalFn make_dev_eval(const Ctx& ctx) {
    return [&ctx](const ParameterSet& params, long) {
        return evaluate_model(ctx.model, params, ctx.dev_src, ctx.dev_tgt, ctx.merges, ctx.src_vocab,
                              ctx.tgt_vocab, 1, ctx.cfg.threads)
            .score;
    };
}

double test_bleu(const Ctx& ctx, const ParameterSet& params, int beam) {
    return evaluate_model(ctx.model, params, ctx.test_src, ctx.test_tgt, ctx.merges, ctx.src_vocab,
                          ctx.tgt_vocab, beam, ctx.cfg.threads)
        .score;
}

// Averaged parameters over the last `average_last` checkpoints of a phase;
// falls back to the live parameters when no checkpoint was emitted.
ParameterSet phase_average(const TrainResult& result, const ParameterSet& live, int average_last) {
    if (result.checkpoints.empty()) return live;
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(average_last),
                                                result.checkpoints.size());
    std::vector<const ParameterSet*> sets;
    for (std::size_t i = result.checkpoints.size() - k; i < result.checkpoints.size(); ++i) {
        sets.push_back(&result.checkpoints[i].params);
    }
    return average_parameters(sets);
}

const Checkpoint* best_dev_checkpoint(const TrainResult& result) {
    const Checkpoint* best = nullptr;
    double best_bleu = -1.0;
    for (const Checkpoint& c : result.checkpoints) {
        auto it = c.meta.find("dev_bleu");
        if (it == c.meta.end()) continue;
        const double b = std::stod(it->second);
        if (best == nullptr || b > best_bleu) {
            best = &c;
            best_bleu = b;
        }
    }
    return best;
}

void write_checkpoints(const TrainResult& result, const std::string& dir, std::vector<std::string>& names) {
    fs::create_directories(dir);
    for (const Checkpoint& c : result.checkpoints) {
        const std::string name = c.meta.at("phase") + "_" + std::to_string(c.step) + ".slnmt";
        save_checkpoint(dir + "/" + name, c);
        names.push_back(name);
    }
}

void save_params(const Ctx& ctx, const std::string& path, const ParameterSet& params, long step,
                 const std::string& phase) {
    Checkpoint c;
    c.config = ctx.model;
    c.params = params;
    c.step = step;
    c.meta["phase"] = phase;
    save_checkpoint(path, c);
}

struct TrainedStage {
    StageRecord record;
    ParameterSet avg_params;
};

TrainOptions base_options(const Ctx& ctx) {
    TrainOptions opt;
    opt.learning_rate = ctx.cfg.learning_rate;
    opt.max_steps = ctx.cfg.max_steps;
    opt.eval_interval = ctx.cfg.eval_interval;
    opt.stop_threshold = ctx.cfg.stop_threshold;
    opt.stop_window = ctx.cfg.stop_window;
    opt.seed = ctx.cfg.seed;
    return opt;
}

TrainedStage do_baseline(const Ctx& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainedStage out;
    StageRecord& rec = out.record;
    rec.name = "baseline";
    rec.authentic_count = ctx.train_ids.size();
    rec.mono_count = ctx.mono.size();
    rec.hashes["train_src"] = hash_hex(hash_lines(ctx.train_src));
    rec.hashes["train_tgt"] = hash_hex(hash_lines(ctx.train_tgt));

    ParameterSet params = init_parameters(ctx.model, ad::stream_seed(ctx.cfg.seed, "baseline"));
    TrainOptions opt = base_options(ctx);
    opt.phase = "baseline";
    TrainResult result = train(ctx.train_ids, ctx.model, params, opt, make_dev_eval(ctx));
    rec.final_step = result.final_step;

    const std::string stage_dir = ctx.out_dir + "/baseline";
    write_checkpoints(result, stage_dir, rec.checkpoints);
    out.avg_params = phase_average(result, params, ctx.cfg.average_last);
    save_params(ctx, stage_dir + "/avg.slnmt", out.avg_params, result.final_step, "baseline_avg");
    rec.checkpoints.push_back("avg.slnmt");

    rec.finetune_bleu = test_bleu(ctx, out.avg_params, ctx.cfg.eval_beam);
    if (const Checkpoint* best = best_dev_checkpoint(result)) {
        rec.best_bleu = test_bleu(ctx, best->params, ctx.cfg.eval_beam);
        rec.best_step = best->step;
    } else {
        rec.best_bleu = rec.finetune_bleu;
        rec.best_step = result.final_step;
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// One self-training round: translate the new slice, filter, pre-train on all
// kept synthetic pairs, fine-tune on the authentic data.
TrainedStage do_round(const Ctx& ctx, int round_index, const std::vector<std::size_t>& slice_indices,
                      const std::vector<SelectionRanking::Item>& slice_items,
                      const ParameterSet& translator, std::vector<std::string>& kept_src,
                      std::vector<std::string>& kept_tgt, std::size_t cumulative_n, std::size_t keep_new) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string stage_dir = ctx.out_dir + "/round" + std::to_string(round_index);
    fs::create_directories(stage_dir);

    TrainedStage out;
    StageRecord& rec = out.record;
    rec.name = method_name(ctx.cfg.method) + (ctx.cfg.schedule.size() > 1
                                                  ? " iter" + std::to_string(round_index)
                                                  : "");
    rec.authentic_count = ctx.train_ids.size();
    rec.mono_count = ctx.mono.size();
    rec.selected_count = cumulative_n;

    // Self-translate the new slice with the current best model.
    std::vector<std::string> slice_src;
    slice_src.reserve(slice_indices.size());
    for (std::size_t idx : slice_indices) slice_src.push_back(ctx.mono[idx]);
    std::vector<std::vector<int>> slice_ids;
    slice_ids.reserve(slice_src.size());
    for (const std::string& line : slice_src) slice_ids.push_back(source_to_ids(line, ctx.merges, ctx.src_vocab));
    std::vector<Hypothesis> hyps =
        translate_corpus(slice_ids, ctx.model, translator, ctx.cfg.synth_beam, ctx.cfg.threads);

    std::vector<std::string> slice_tgt;
    std::vector<ScoredTranslation> scored;
    slice_tgt.reserve(hyps.size());
    scored.reserve(hyps.size());
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        slice_tgt.push_back(ids_to_text(hyps[i].tokens, ctx.tgt_vocab));
        scored.push_back(scored_from_log_probs(slice_src[i], slice_tgt.back(), hyps[i].log_probs));
    }
    save_lines(stage_dir + "/synthetic.src", slice_src);
    save_lines(stage_dir + "/synthetic.tgt", slice_tgt);
    save_scores(stage_dir + "/scores.tsv", scored);
    if (!slice_items.empty()) {
        SelectionRanking ranking;
        ranking.n_max = ctx.cfg.nmax;
        ranking.decay = ctx.cfg.decay;
        ranking.items = slice_items;
        save_ranking(stage_dir + "/ranking.tsv", ranking);
    }

    // Keep the best of the new slice and add them to the synthetic pool.
    std::vector<std::size_t> kept_idx;
    if (uses_qe(ctx.cfg.method)) {
        kept_idx = select_best_indices(scored, keep_new);
    } else {
        kept_idx.resize(scored.size());
        for (std::size_t i = 0; i < scored.size(); ++i) kept_idx[i] = i;
    }
    for (std::size_t i : kept_idx) {
        kept_src.push_back(slice_src[i]);
        kept_tgt.push_back(slice_tgt[i]);
    }
    rec.kept_count = kept_src.size();
    save_lines(stage_dir + "/kept.src", kept_src);
    save_lines(stage_dir + "/kept.tgt", kept_tgt);
    rec.hashes["selected"] = hash_hex(hash_lines(slice_src));
    rec.hashes["synthetic"] = hash_hex(hash_lines(slice_tgt));
    rec.hashes["kept_src"] = hash_hex(hash_lines(kept_src));
    rec.hashes["kept_tgt"] = hash_hex(hash_lines(kept_tgt));

    // Fresh model: pre-train on synthetic, fine-tune on authentic.
    std::vector<IdPair> synthetic_ids = encode_pairs(ctx, kept_src, kept_tgt);
    ParameterSet params =
        init_parameters(ctx.model, ad::stream_seed(ctx.cfg.seed, "round" + std::to_string(round_index)));
    TrainOptions opt = base_options(ctx);
    TwoPhaseResult phases = pretrain_finetune(synthetic_ids, ctx.train_ids, ctx.model, params, opt,
                                              make_dev_eval(ctx));
    rec.final_step = phases.finetune.final_step;

    write_checkpoints(phases.pretrain, stage_dir, rec.checkpoints);
    write_checkpoints(phases.finetune, stage_dir, rec.checkpoints);

    ParameterSet pre_avg = phase_average(phases.pretrain, params, ctx.cfg.average_last);
    save_params(ctx, stage_dir + "/pretrain_avg.slnmt", pre_avg, phases.boundary_step, "pretrain_avg");
    rec.checkpoints.push_back("pretrain_avg.slnmt");
    rec.pretrain_bleu = test_bleu(ctx, pre_avg, ctx.cfg.eval_beam);

    out.avg_params = phase_average(phases.finetune, params, ctx.cfg.average_last);
    save_params(ctx, stage_dir + "/finetune_avg.slnmt", out.avg_params, phases.finetune.final_step,
                "finetune_avg");
    rec.checkpoints.push_back("finetune_avg.slnmt");
    rec.finetune_bleu = test_bleu(ctx, out.avg_params, ctx.cfg.eval_beam);

    if (const Checkpoint* best = best_dev_checkpoint(phases.finetune)) {
        rec.best_bleu = test_bleu(ctx, best->params, ctx.cfg.eval_beam);
        rec.best_step = best->step;
    } else {
        rec.best_bleu = rec.finetune_bleu;
        rec.best_step = rec.final_step;
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

RunManifest run_rounds(const ExperimentConfig& cfg, const std::string& out_dir) {
    Ctx ctx = prepare(cfg, out_dir);
    RunManifest manifest;
    manifest.config = cfg.raw;

    TrainedStage baseline = do_baseline(ctx);
    manifest.stages.push_back(baseline.record);

    for (const ScheduleStage& st : cfg.schedule) {
        if (st.select_n > ctx.mono.size()) {
            throw std::runtime_error("config: schedule requests " + std::to_string(st.select_n) +
                                     " monolingual sentences but the corpus has " +
                                     std::to_string(ctx.mono.size()));
        }
    }

    std::optional<Selector> selector;
    if (uses_ds(cfg.method)) {
        FeatureTable features = extract_features(ctx.test_src, cfg.nmax);
        selector.emplace(ctx.mono, std::move(features), cfg.decay);
    }

    ParameterSet translator = std::move(baseline.avg_params);
    std::vector<std::string> kept_src, kept_tgt;
    std::size_t prev_n = 0, prev_m = 0;
    for (std::size_t k = 0; k < cfg.schedule.size(); ++k) {
        const ScheduleStage& st = cfg.schedule[k];
        const std::size_t slice_n = st.select_n - prev_n;
        const std::size_t keep_new = st.keep_m - prev_m;
        std::vector<std::size_t> slice_indices;
        std::vector<SelectionRanking::Item> slice_items;
        if (selector) {
            slice_items = selector->take(slice_n);
            for (const auto& item : slice_items) slice_indices.push_back(item.index);
        } else {
            for (std::size_t i = prev_n; i < st.select_n; ++i) slice_indices.push_back(i);
        }
        TrainedStage round = do_round(ctx, static_cast<int>(k + 1), slice_indices, slice_items, translator,
                                      kept_src, kept_tgt, st.select_n, keep_new);
        manifest.stages.push_back(round.record);
        translator = std::move(round.avg_params);
        prev_n = st.select_n;
        prev_m = st.keep_m;
    }
    manifest.save(out_dir + "/manifest.json");
    return manifest;
}

}  // namespace

RunManifest run_baseline(const ExperimentConfig& config, const std::string& out_dir) {
    Ctx ctx = prepare(config, out_dir);
    RunManifest manifest;
    manifest.config = config.raw;
    manifest.stages.push_back(do_baseline(ctx).record);
    manifest.save(out_dir + "/manifest.json");
    return manifest;
}

RunManifest run_selftrain(const ExperimentConfig& config, const std::string& out_dir) {
    ExperimentConfig cfg = config;
    if (cfg.schedule.size() != 1) {
        throw std::invalid_argument("selftrain: expected a single-stage schedule, got " +
                                    std::to_string(cfg.schedule.size()));
    }
    return run_rounds(cfg, out_dir);
}

RunManifest run_iterative(const ExperimentConfig& config, const std::string& out_dir) {
    if (config.schedule.size() < 2) {
        throw std::invalid_argument("iterate: schedule needs at least 2 stages, got " +
                                    std::to_string(config.schedule.size()));
    }
    return run_rounds(config, out_dir);
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

namespace {

std::string fmt_double(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

void emit_report(const std::vector<RunManifest>& manifests, const std::string& out_dir) {
    if (manifests.empty()) throw std::invalid_argument("report: no manifests");
    fs::create_directories(out_dir);

    struct Row {
        std::string method;
        std::size_t quantity;
        std::optional<double> pretrain;
        double finetune;
    };
    std::vector<Row> rows;
    for (const RunManifest& m : manifests) {
        for (const StageRecord& st : m.stages) {
            rows.push_back({st.name, st.kept_count, st.pretrain_bleu, st.finetune_bleu});
        }
    }

    std::ofstream tsv(out_dir + "/report.tsv", std::ios::binary);
    if (!tsv) throw std::runtime_error("cannot write " + out_dir + "/report.tsv");
    tsv << "method\tmono_quantity\tpretrain_bleu\tfinetune_bleu\n";
    for (const Row& r : rows) {
        tsv << r.method << '\t' << r.quantity << '\t' << (r.pretrain ? fmt_double(*r.pretrain) : "-") << '\t'
            << fmt_double(r.finetune) << '\n';
    }
    tsv.close();

    // Dual-axis SVG: quantity on the left axis, BLEU on the right.
    const double width = 720, height = 480;
    const double ml = 80, mr = 80, mt = 40, mb = 110;
    const double plot_w = width - ml - mr, plot_h = height - mt - mb;
    std::size_t max_q = 1;
    double max_b = 1.0;
    for (const Row& r : rows) {
        max_q = std::max(max_q, r.quantity);
        max_b = std::max(max_b, r.finetune);
    }
    max_b = max_b * 1.1 + 1e-9;
    auto x_at = [&](std::size_t i) {
        return rows.size() == 1 ? ml + plot_w / 2
                                : ml + plot_w * static_cast<double>(i) / static_cast<double>(rows.size() - 1);
    };
    auto yq_at = [&](std::size_t q) {
        return mt + plot_h * (1.0 - static_cast<double>(q) / static_cast<double>(max_q));
    };
    auto yb_at = [&](double b) { return mt + plot_h * (1.0 - b / max_b); };

    std::ofstream svg(out_dir + "/report.svg", std::ios::binary);
    if (!svg) throw std::runtime_error("cannot write " + out_dir + "/report.svg");
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << (mt + plot_h)
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << (ml + plot_w) << "\" y1=\"" << mt << "\" x2=\"" << (ml + plot_w) << "\" y2=\""
        << (mt + plot_h) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << (mt + plot_h) << "\" x2=\"" << (ml + plot_w) << "\" y2=\""
        << (mt + plot_h) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"20\" y=\"" << (mt + plot_h / 2) << "\" transform=\"rotate(-90 20 " << (mt + plot_h / 2)
        << ")\" text-anchor=\"middle\" font-size=\"13\">quantity of monolingual data</text>\n";
    svg << "<text x=\"" << (width - 20) << "\" y=\"" << (mt + plot_h / 2) << "\" transform=\"rotate(90 "
        << (width - 20) << " " << (mt + plot_h / 2)
        << ")\" text-anchor=\"middle\" font-size=\"13\">quality (BLEU, fine-tuned)</text>\n";

    std::ostringstream quantity_points, bleu_points;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        quantity_points << x_at(i) << ',' << yq_at(rows[i].quantity) << ' ';
        bleu_points << x_at(i) << ',' << yb_at(rows[i].finetune) << ' ';
        svg << "<text x=\"" << x_at(i) << "\" y=\"" << (mt + plot_h + 16) << "\" transform=\"rotate(45 "
            << x_at(i) << " " << (mt + plot_h + 16) << ")\" font-size=\"12\">" << rows[i].method
            << "</text>\n";
    }
    svg << "<polyline points=\"" << quantity_points.str()
        << "\" fill=\"none\" stroke=\"blue\" stroke-width=\"2\"/>\n";
    svg << "<polyline points=\"" << bleu_points.str()
        << "\" fill=\"none\" stroke=\"red\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        svg << "<rect x=\"" << (x_at(i) - 3) << "\" y=\"" << (yq_at(rows[i].quantity) - 3)
            << "\" width=\"6\" height=\"6\" fill=\"blue\"/>\n";
        svg << "<circle cx=\"" << x_at(i) << "\" cy=\"" << yb_at(rows[i].finetune)
            << "\" r=\"3.5\" fill=\"none\" stroke=\"red\" stroke-width=\"1.5\"/>\n";
    }
    svg << "<text x=\"" << (ml + 10) << "\" y=\"" << (mt - 14)
        << "\" font-size=\"13\" fill=\"blue\">quantity</text>\n";
    svg << "<text x=\"" << (ml + 100) << "\" y=\"" << (mt - 14)
        << "\" font-size=\"13\" fill=\"red\">quality</text>\n";
    svg << "</svg>\n";
}

}  // namespace slnmt
