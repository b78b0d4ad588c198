#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <stdexcept>

#include "slnmt/bpe.hpp"
#include "slnmt/model.hpp"

using namespace slnmt;
using ad::Tensor;

namespace {

ModelConfig tiny_config(int src_vocab = 10, int tgt_vocab = 10, int emb = 4, int hidden = 6) {
    ModelConfig cfg;
    cfg.src_vocab = src_vocab;
    cfg.tgt_vocab = tgt_vocab;
    cfg.emb_size = emb;
    cfg.hidden_size = hidden;
    cfg.dropout = 0.0;
    cfg.batch_size = 8;
    return cfg;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

std::vector<IdPair> copy_task_pairs(int count, int vocab, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<IdPair> pairs;
    for (int i = 0; i < count; ++i) {
        const int len = 2 + static_cast<int>(rng() % 4);
        std::vector<int> toks;
        for (int j = 0; j < len; ++j) toks.push_back(4 + static_cast<int>(rng() % (vocab - 4)));
        std::vector<int> src = toks;
        src.push_back(Vocabulary::kEos);
        pairs.emplace_back(src, toks);
    }
    return pairs;
}

}  // namespace

TEST_CASE("encode produces one annotation row per source position") {
    ModelConfig cfg = tiny_config();
    ParameterSet params = init_parameters(cfg, 3);
    EncoderAnnotations ann = encode({5}, cfg, params);
    CHECK(ann.h.shape == std::vector<int>{1, 2 * cfg.hidden_size});
    EncoderAnnotations ann4 = encode({5, 6, 7, 2}, cfg, params);
    CHECK(ann4.h.shape == std::vector<int>{4, 2 * cfg.hidden_size});
    CHECK_THROWS_AS(encode({}, cfg, params), std::invalid_argument);
}

TEST_CASE("all-zero parameters give all-zero annotations") {
    ModelConfig cfg = tiny_config();
    ParameterSet params = init_parameters(cfg, 3);
    for (Tensor& t : params.values) {
        for (double& x : t.v) x = 0.0;
    }
    EncoderAnnotations ann = encode({4, 5, 6}, cfg, params);
    for (double x : ann.h.v) CHECK(x == 0.0);
}

TEST_CASE("reversing the source swaps direction roles under shared weights") {
    ModelConfig cfg = tiny_config();
    ParameterSet params = init_parameters(cfg, 7);
    params.at("enc.l0.bwd.wx") = params.at("enc.l0.fwd.wx");
    params.at("enc.l0.bwd.wh") = params.at("enc.l0.fwd.wh");
    params.at("enc.l0.bwd.b") = params.at("enc.l0.fwd.b");

    const std::vector<int> src = {4, 5, 6, 7, 8};
    std::vector<int> rev(src.rbegin(), src.rend());
    Tensor a = encode(src, cfg, params).h;
    Tensor b = encode(rev, cfg, params).h;
    const int T = static_cast<int>(src.size());
    const int H = cfg.hidden_size;
    for (int j = 0; j < T; ++j) {
        for (int k = 0; k < H; ++k) {
            // forward state of the reversed input is the backward state of
            // the original at the mirrored position, and vice versa.
            CHECK(b.at(j, k) == doctest::Approx(a.at(T - 1 - j, H + k)).epsilon(1e-14));
            CHECK(b.at(j, H + k) == doctest::Approx(a.at(T - 1 - j, k)).epsilon(1e-14));
        }
    }
}

// Scalar re-evaluation of the additive-attention equations, loop by loop.
TEST_CASE("attention matches a scalar step-by-step evaluation") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        ModelConfig cfg = tiny_config();
        ParameterSet params = init_parameters(cfg, 100 + trial);
        const int T = 1 + static_cast<int>(rng() % 5);
        const int D = cfg.annotation_dim();
        const int H = cfg.hidden_size;
        Tensor ann = Tensor::zeros({T, D});
        ad::fill_uniform(ann, rng, -1, 1);
        Tensor s_prev = Tensor::zeros({H});
        ad::fill_uniform(s_prev, rng, -1, 1);

        auto [context, weights] = attention_context(s_prev, ann, cfg, params);

        const Tensor& W = params.at("att.w");
        const Tensor& U = params.at("att.u");
        const Tensor& va = params.at("att.v");
        std::vector<double> energies(static_cast<std::size_t>(T));
        for (int j = 0; j < T; ++j) {
            double e = 0.0;
            for (int a = 0; a < H; ++a) {
                double ws = 0.0;
                for (int h = 0; h < H; ++h) ws += W.at(a, h) * s_prev.at(h);
                double uh = 0.0;
                for (int d = 0; d < D; ++d) uh += U.at(d, a) * ann.at(j, d);
                e += va.at(a) * std::tanh(ws + uh);
            }
            energies[static_cast<std::size_t>(j)] = e;
        }
        double mx = *std::max_element(energies.begin(), energies.end());
        double z = 0.0;
        for (double e : energies) z += std::exp(e - mx);
        double wsum = 0.0;
        for (int j = 0; j < T; ++j) {
            const double a_j = std::exp(energies[static_cast<std::size_t>(j)] - mx) / z;
            wsum += a_j;
            CHECK(std::abs(weights.at(j) - a_j) < 1e-12);
        }
        CHECK(std::abs(wsum - 1.0) < 1e-12);
        for (int d = 0; d < D; ++d) {
            double c = 0.0;
            for (int j = 0; j < T; ++j) c += weights.at(j) * ann.at(j, d);
            CHECK(std::abs(context.at(d) - c) < 1e-12);
        }
    }
}

TEST_CASE("uniform attention when the scoring vector is zero") {
    ModelConfig cfg = tiny_config();
    ParameterSet params = init_parameters(cfg, 5);
    for (double& x : params.at("att.v").v) x = 0.0;
    const int T = 4;
    Tensor ann = Tensor::zeros({T, cfg.annotation_dim()});
    std::mt19937_64 rng(2);
    ad::fill_uniform(ann, rng, -1, 1);
    Tensor s = Tensor::zeros({cfg.hidden_size});
    auto [context, weights] = attention_context(s, ann, cfg, params);
    for (int j = 0; j < T; ++j) CHECK(weights.at(j) == doctest::Approx(0.25).epsilon(1e-13));
    for (int d = 0; d < cfg.annotation_dim(); ++d) {
        double mean = 0.0;
        for (int j = 0; j < T; ++j) mean += ann.at(j, d) / T;
        CHECK(context.at(d) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("single-annotation attention is the identity") {
    ModelConfig cfg = tiny_config();
    ParameterSet params = init_parameters(cfg, 6);
    Tensor ann = Tensor::zeros({1, cfg.annotation_dim()});
    std::mt19937_64 rng(3);
    ad::fill_uniform(ann, rng, -2, 2);
    Tensor s = Tensor::zeros({cfg.hidden_size});
    ad::fill_uniform(s, rng, -1, 1);
    auto [context, weights] = attention_context(s, ann, cfg, params);
    CHECK(weights.at(0) == doctest::Approx(1.0).epsilon(1e-15));
    for (int d = 0; d < cfg.annotation_dim(); ++d) {
        CHECK(context.at(d) == doctest::Approx(ann.at(0, d)).epsilon(1e-15));
    }
}

TEST_CASE("decoder step yields a normalized distribution and is pure") {
    ModelConfig cfg = tiny_config();
    ParameterSet params = init_parameters(cfg, 9);
    Tensor ann = encode({4, 5, 6}, cfg, params).h;
    DecoderState st = initial_decoder_state(ann, cfg, params);
    auto [st1, dist1] = decoder_step(Vocabulary::kBos, st, ann, cfg, params);
    auto [st2, dist2] = decoder_step(Vocabulary::kBos, st, ann, cfg, params);
    double sum = 0.0;
    for (double p : dist1.v) sum += p;
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(dist1.v == dist2.v);
    CHECK(st1.h[0].v == st2.h[0].v);
    CHECK_THROWS_AS(decoder_step(cfg.tgt_vocab + 3, st, ann, cfg, params), std::out_of_range);
}

TEST_CASE("forced decode equals stepping the decoder with teacher tokens") {
    ModelConfig cfg = tiny_config();
    ParameterSet params = init_parameters(cfg, 21);
    const std::vector<int> src = {4, 7, 2};
    const std::vector<int> tgt = {5, 6, 8};
    std::vector<double> lps = forced_log_probs(src, tgt, cfg, params);
    REQUIRE(lps.size() == tgt.size() + 1);  // includes EOS

    Tensor ann = encode(src, cfg, params).h;
    DecoderState st = initial_decoder_state(ann, cfg, params);
    int prev = Vocabulary::kBos;
    std::vector<int> targets = tgt;
    targets.push_back(Vocabulary::kEos);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        auto [next, dist] = decoder_step(prev, st, ann, cfg, params);
        CHECK(std::abs(std::log(dist.at(targets[i])) - lps[i]) < 1e-12);
        st = next;
        prev = targets[i];
    }
}

TEST_CASE("hypothesis score is the sum of its token log probabilities") {
    ModelConfig cfg = tiny_config();
    ParameterSet params = init_parameters(cfg, 33);
    Hypothesis hyp = translate({4, 5, 2}, cfg, params, 1);
    REQUIRE(!hyp.tokens.empty());
    const double sum = std::accumulate(hyp.log_probs.begin(), hyp.log_probs.end(), 0.0);
    CHECK(std::abs(hyp.score - sum) < 1e-12);
    for (double lp : hyp.log_probs) CHECK(lp <= 0.0);
    CHECK_THROWS_AS(translate({}, cfg, params, 1), std::invalid_argument);
}

TEST_CASE("the beam decoder at width one reproduces greedy exactly") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull, 6ull}) {
        ModelConfig cfg = tiny_config(12, 12);
        ParameterSet params = init_parameters(cfg, seed);
        const std::vector<int> src = {4, 9, 5, 2};
        Hypothesis greedy = translate_greedy(src, cfg, params);
        Hypothesis beam1 = translate_beam(src, cfg, params, 1);
        CHECK(greedy.tokens == beam1.tokens);
        CHECK(greedy.score == doctest::Approx(beam1.score).epsilon(1e-15));
        REQUIRE(greedy.log_probs.size() == beam1.log_probs.size());
        for (std::size_t i = 0; i < greedy.log_probs.size(); ++i) {
            CHECK(greedy.log_probs[i] == beam1.log_probs[i]);
        }
    }
}

// Exhaustive search over every decodable sequence on a 5-token vocabulary
// with a 2-step horizon, ranked by length-normalized score.
TEST_CASE("beam search matches brute-force enumeration on a tiny horizon") {
    ModelConfig cfg = tiny_config(6, 5);
    cfg.max_decode_len = 2;
    ParameterSet params = init_parameters(cfg, 77);
    const std::vector<int> src = {4, 2};

    Hypothesis beam = translate_beam(src, cfg, params, 3);

    Tensor ann = encode(src, cfg, params).h;
    DecoderState st0 = initial_decoder_state(ann, cfg, params);
    auto [st1, dist1] = decoder_step(Vocabulary::kBos, st0, ann, cfg, params);
    double best_norm = -1e300;
    std::vector<int> best_tokens;
    for (int t1 = 2; t1 < cfg.tgt_vocab; ++t1) {
        const double lp1 = std::log(dist1.at(t1));
        if (t1 == Vocabulary::kEos) {
            if (lp1 > best_norm) {
                best_norm = lp1;
                best_tokens = {t1};
            }
            continue;
        }
        auto [st2, dist2] = decoder_step(t1, st1, ann, cfg, params);
        (void)st2;
        for (int t2 = 2; t2 < cfg.tgt_vocab; ++t2) {
            const double norm = (lp1 + std::log(dist2.at(t2))) / 2.0;
            if (norm > best_norm) {
                best_norm = norm;
                best_tokens = {t1, t2};
            }
        }
    }
    CHECK(beam.tokens == best_tokens);
    CHECK(beam.score / beam.tokens.size() == doctest::Approx(best_norm).epsilon(1e-12));
}

TEST_CASE("training reduces loss on a copy task") {
    ModelConfig cfg = tiny_config(16, 16, 8, 16);
    cfg.batch_size = 8;
    std::vector<IdPair> pairs = copy_task_pairs(50, 16, 42);
    ParameterSet params = init_parameters(cfg, 1);
    const double initial = batch_loss(pairs, cfg, params, nullptr);
    TrainOptions opt;
    opt.learning_rate = 5e-3;
    opt.max_steps = 500;
    opt.seed = 7;
    TrainResult result = train(pairs, cfg, params, opt, nullptr);
    const double final_loss = batch_loss(pairs, cfg, params, nullptr);
    CHECK(final_loss < initial);
    CHECK(result.final_step == 500);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    ModelConfig cfg = tiny_config();
    std::vector<IdPair> pairs = copy_task_pairs(10, 10, 3);
    ParameterSet params = init_parameters(cfg, 5);
    ParameterSet before = params;
    TrainOptions opt;
    opt.learning_rate = 0.0;
    opt.max_steps = 20;
    train(pairs, cfg, params, opt, nullptr);
    for (std::size_t k = 0; k < params.size(); ++k) CHECK(params.values[k].v == before.values[k].v);
}

TEST_CASE("training is bit-deterministic given the seed") {
    auto run = [](std::uint64_t seed) {
        ModelConfig cfg = tiny_config(12, 12, 6, 8);
        cfg.batch_size = 4;
        cfg.dropout = 0.2;
        std::vector<IdPair> pairs = copy_task_pairs(20, 12, 9);
        ParameterSet params = init_parameters(cfg, seed);
        TrainOptions opt;
        opt.max_steps = 60;
        opt.eval_interval = 20;
        opt.seed = seed;
        TrainResult r = train(pairs, cfg, params, opt, nullptr);
        return std::make_pair(params, r.checkpoints.size());
    };
    auto [p1, n1] = run(123);
    auto [p2, n2] = run(123);
    CHECK(n1 == 3);
    CHECK(n1 == n2);
    for (std::size_t k = 0; k < p1.size(); ++k) CHECK(p1.values[k].v == p2.values[k].v);
}

TEST_CASE("teacher-forced loss equals negated mean forced log probability") {
    ModelConfig cfg = tiny_config();
    ParameterSet params = init_parameters(cfg, 55);
    std::vector<IdPair> batch = {{{4, 5, 2}, {6, 7}}, {{8, 2}, {9}}};
    double loss = batch_loss(batch, cfg, params, nullptr);
    double sum = 0.0;
    std::size_t count = 0;
    for (const IdPair& pr : batch) {
        for (double lp : forced_log_probs(pr.first, pr.second, cfg, params)) {
            sum += lp;
            count += 1;
        }
    }
    CHECK(loss == doctest::Approx(-sum / static_cast<double>(count)).epsilon(1e-13));
}

TEST_CASE("full-model gradients match central finite differences") {
    ModelConfig cfg = tiny_config(9, 9, 3, 4);
    ParameterSet params = init_parameters(cfg, 2718);
    std::vector<IdPair> batch = {{{4, 5, 2}, {6, 7, 8}}, {{6, 2}, {4}}};
    std::vector<Tensor> grads;
    batch_loss(batch, cfg, params, &grads);
    const double h = 1e-5;
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < params.values[k].v.size(); ++i) {
            ParameterSet plus = params, minus = params;
            plus.values[k].v[i] += h;
            minus.values[k].v[i] -= h;
            const double fd =
                (batch_loss(batch, cfg, plus, nullptr) - batch_loss(batch, cfg, minus, nullptr)) / (2 * h);
            CHECK(rel_err(grads[k].v[i], fd) < 1e-3);
        }
    }
}

TEST_CASE("pretrain then finetune keeps a cumulative step counter") {
    ModelConfig cfg = tiny_config(12, 12, 4, 6);
    cfg.batch_size = 4;
    std::vector<IdPair> syn = copy_task_pairs(12, 12, 31);
    std::vector<IdPair> aut = copy_task_pairs(12, 12, 32);
    ParameterSet params = init_parameters(cfg, 8);
    TrainOptions opt;
    opt.max_steps = 30;
    opt.eval_interval = 10;
    TwoPhaseResult r = pretrain_finetune(syn, aut, cfg, params, opt, nullptr);
    CHECK(r.boundary_step == 30);
    CHECK(r.finetune.final_step == 60);
    REQUIRE(!r.pretrain.checkpoints.empty());
    REQUIRE(!r.finetune.checkpoints.empty());
    CHECK(r.pretrain.checkpoints.front().meta.at("phase") == "pretrain");
    CHECK(r.finetune.checkpoints.front().meta.at("phase") == "finetune");
    CHECK(r.finetune.checkpoints.front().meta.at("phase_start") == "30");
    CHECK(r.finetune.checkpoints.front().step == 40);
    CHECK_THROWS_AS(pretrain_finetune({}, aut, cfg, params, opt, nullptr), std::invalid_argument);
}

TEST_CASE("identical data in both phases is a valid sanity path") {
    ModelConfig cfg = tiny_config(10, 10, 4, 6);
    cfg.batch_size = 4;
    std::vector<IdPair> data = copy_task_pairs(8, 10, 77);
    ParameterSet params = init_parameters(cfg, 4);
    TrainOptions opt;
    opt.max_steps = 10;
    TwoPhaseResult r = pretrain_finetune(data, data, cfg, params, opt, nullptr);
    CHECK(r.finetune.final_step == 20);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "slnmt_model_test";
    fs::create_directories(dir);
    ModelConfig cfg = tiny_config(14, 13, 5, 7);
    cfg.dropout = 0.3;
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.params = init_parameters(cfg, 999);
    ckpt.step = 12345;
    ckpt.meta["phase"] = "pretrain";
    const std::string path = (dir / "model.slnmt").string();
    save_checkpoint(path, ckpt);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.step == ckpt.step);
    CHECK(back.meta == ckpt.meta);
    CHECK(back.config.to_kv() == cfg.to_kv());
    REQUIRE(back.params.names == ckpt.params.names);
    for (std::size_t k = 0; k < ckpt.params.size(); ++k) {
        CHECK(back.params.values[k].shape == ckpt.params.values[k].shape);
        CHECK(back.params.values[k].v == ckpt.params.values[k].v);
    }
    fs::remove_all(dir);
}

TEST_CASE("loading a non-checkpoint file fails cleanly") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "slnmt_model_test2";
    fs::create_directories(dir);
    const std::string path = (dir / "bogus.slnmt").string();
    std::ofstream(path) << "not a checkpoint";
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("averaging identical checkpoints is the identity") {
    ModelConfig cfg = tiny_config();
    std::vector<Checkpoint> ckpts;
    Checkpoint base;
    base.config = cfg;
    base.params = init_parameters(cfg, 111);
    for (int i = 0; i < 8; ++i) ckpts.push_back(base);
    ParameterSet avg = average_checkpoints(ckpts);
    for (std::size_t k = 0; k < avg.size(); ++k) CHECK(avg.values[k].v == base.params.values[k].v);
}

TEST_CASE("averaging two offset checkpoints gives the midpoint") {
    ModelConfig cfg = tiny_config();
    Checkpoint zero, two;
    zero.config = two.config = cfg;
    zero.params = init_parameters(cfg, 1);
    two.params = zero.params;
    for (Tensor& t : zero.params.values)
        for (double& x : t.v) x = 0.0;
    for (Tensor& t : two.params.values)
        for (double& x : t.v) x = 2.0;
    ParameterSet avg = average_checkpoints({zero, two});
    for (const Tensor& t : avg.values)
        for (double x : t.v) CHECK(x == 1.0);
}

TEST_CASE("averaging matches an elementwise mean oracle") {
    ModelConfig cfg = tiny_config();
    std::vector<Checkpoint> ckpts(8);
    for (int i = 0; i < 8; ++i) {
        ckpts[static_cast<std::size_t>(i)].config = cfg;
        ckpts[static_cast<std::size_t>(i)].params = init_parameters(cfg, 1000 + static_cast<std::uint64_t>(i));
    }
    ParameterSet avg = average_checkpoints(ckpts);
    for (std::size_t k = 0; k < avg.size(); ++k) {
        for (std::size_t i = 0; i < avg.values[k].v.size(); ++i) {
            double mean = 0.0;
            for (const Checkpoint& c : ckpts) mean += c.params.values[k].v[i];
            mean /= 8.0;
            CHECK(std::abs(avg.values[k].v[i] - mean) <= 1e-15);
        }
    }
}

TEST_CASE("averaging rejects mismatched layouts") {
    ModelConfig a = tiny_config(10, 10);
    ModelConfig b = tiny_config(11, 10);
    Checkpoint ca, cb;
    ca.config = a;
    ca.params = init_parameters(a, 1);
    cb.config = b;
    cb.params = init_parameters(b, 1);
    CHECK_THROWS_AS(average_checkpoints({ca, cb}), std::invalid_argument);
}

TEST_CASE("model config text block round-trips") {
    ModelConfig cfg = tiny_config(123, 456, 10, 20);
    cfg.dropout = 0.125;
    cfg.bidirectional = false;
    cfg.max_decode_len = 77;
    ModelConfig back = ModelConfig::from_kv(cfg.to_kv());
    CHECK(back.to_kv() == cfg.to_kv());
    CHECK(back.bidirectional == false);
    CHECK(back.dropout == 0.125);
}
