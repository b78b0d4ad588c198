#include "slnmt/cli.hpp"

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slnmt/bleu.hpp"
#include "slnmt/bpe.hpp"
#include "slnmt/corpus.hpp"
#include "slnmt/eval.hpp"
#include "slnmt/fda.hpp"
#include "slnmt/model.hpp"
#include "slnmt/pipeline.hpp"
#include "slnmt/qe.hpp"

namespace slnmt {

namespace {

struct VocabPair {
    Vocabulary src;
    Vocabulary tgt;
};

VocabPair load_vocab_pair(const std::vector<std::string>& paths) {
    if (paths.size() != 2) throw std::runtime_error("--vocab expects two files: source target");
    return {load_vocab(paths[0]), load_vocab(paths[1])};
}

ExperimentConfig config_with_seed(const std::string& path, std::optional<std::uint64_t> seed) {
    ExperimentConfig cfg = ExperimentConfig::from_file(path);
    if (seed) {
        cfg.seed = *seed;
        cfg.raw["seed"] = std::to_string(*seed);
    }
    return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"slnmt: self-training toolkit for low-resource machine translation"};
    app.require_subcommand(1);

    // learn-bpe
    std::string lb_src, lb_tgt, lb_out;
    int lb_merges = 0;
    auto* learn = app.add_subcommand("learn-bpe", "Learn BPE merges from one or two corpora");
    learn->add_option("--src", lb_src, "training corpus (source side)")->required();
    learn->add_option("--tgt", lb_tgt, "optional second corpus for joint merges");
    learn->add_option("--n", lb_merges, "number of merge operations")->required();
    learn->add_option("--out", lb_out, "output merge table")->required();
    learn->callback([&]() {
        std::vector<std::string> corpus = load_lines(lb_src);
        if (!lb_tgt.empty()) {
            std::vector<std::string> tgt = load_lines(lb_tgt);
            corpus.insert(corpus.end(), tgt.begin(), tgt.end());
        }
        save_merges(lb_out, learn_bpe(corpus, lb_merges));
    });

    // apply-bpe
    std::string ab_src, ab_merges, ab_out;
    auto* apply = app.add_subcommand("apply-bpe", "Apply a merge table to a corpus");
    apply->add_option("--merges", ab_merges, "merge table file")->required();
    apply->add_option("--src", ab_src, "input corpus")->required();
    apply->add_option("--out", ab_out, "output corpus")->required();
    apply->callback([&]() {
        save_lines(ab_out, apply_bpe_corpus(load_lines(ab_src), load_merges(ab_merges)));
    });

    // build-vocab
    std::string bv_src, bv_out;
    int bv_max = 50000;
    auto* build = app.add_subcommand("build-vocab", "Build a vocabulary from a BPE-applied corpus");
    build->add_option("--src", bv_src, "BPE-applied corpus")->required();
    build->add_option("--n", bv_max, "maximum vocabulary size (reserved tokens included)");
    build->add_option("--out", bv_out, "output vocabulary")->required();
    build->callback([&]() { save_vocab(bv_out, build_vocab(load_lines(bv_src), bv_max)); });

    // train
    std::string tr_config, tr_out;
    std::optional<std::uint64_t> tr_seed;
    auto* tr = app.add_subcommand("train", "Train a baseline model from a config file");
    tr->add_option("--config", tr_config, "experiment config (key=value)")->required();
    tr->add_option("--seed", tr_seed, "override the config seed");
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->callback([&]() { run_baseline(config_with_seed(tr_config, tr_seed), tr_out); });

    // translate
    std::string x_ckpt, x_merges, x_src, x_out;
    std::vector<std::string> x_vocab;
    int x_beam = 1;
    auto* tl = app.add_subcommand("translate", "Translate a corpus with a saved checkpoint");
    tl->add_option("--checkpoint", x_ckpt, "model checkpoint")->required();
    tl->add_option("--merges", x_merges, "merge table")->required();
    tl->add_option("--vocab", x_vocab, "source and target vocabulary files")->expected(2)->required();
    tl->add_option("--src", x_src, "input corpus")->required();
    tl->add_option("--beam", x_beam, "beam width (1 = greedy)");
    tl->add_option("--out", x_out, "output corpus")->required();
    tl->callback([&]() {
        Checkpoint ckpt = load_checkpoint(x_ckpt);
        MergeTable merges = load_merges(x_merges);
        VocabPair vocab = load_vocab_pair(x_vocab);
        std::vector<std::string> lines = load_lines(x_src);
        std::vector<std::vector<int>> ids;
        ids.reserve(lines.size());
        for (const std::string& line : lines) ids.push_back(source_to_ids(line, merges, vocab.src));
        std::vector<Hypothesis> hyps = translate_corpus(ids, ckpt.config, ckpt.params, x_beam, 1);
        std::vector<std::string> out;
        out.reserve(hyps.size());
        for (const Hypothesis& h : hyps) out.push_back(ids_to_text(h.tokens, vocab.tgt));
        save_lines(x_out, out);
    });

    // select
    std::string se_test, se_mono, se_out;
    std::size_t se_n = 0;
    double se_decay = 0.5;
    int se_nmax = 3;
    auto* sel = app.add_subcommand("select", "Rank monolingual sentences by domain closeness");
    sel->add_option("--test", se_test, "test-set source side (feature source)")->required();
    sel->add_option("--mono", se_mono, "monolingual corpus to rank")->required();
    sel->add_option("--n", se_n, "number of sentences to select")->required();
    sel->add_option("--decay", se_decay, "feature decay factor in (0,1)");
    sel->add_option("--nmax", se_nmax, "maximum n-gram order");
    sel->add_option("--out", se_out, "output ranking TSV")->required();
    sel->callback([&]() {
        FeatureTable table = extract_features(load_lines(se_test), se_nmax);
        save_ranking(se_out, select(load_lines(se_mono), table, se_n, se_decay));
    });

    // qe-score
    std::string qe_ckpt, qe_merges, qe_src, qe_tgt, qe_out;
    std::vector<std::string> qe_vocab;
    auto* qe = app.add_subcommand("qe-score", "Confidence-score synthetic pairs with forced decoding");
    qe->add_option("--checkpoint", qe_ckpt, "model checkpoint")->required();
    qe->add_option("--merges", qe_merges, "merge table")->required();
    qe->add_option("--vocab", qe_vocab, "source and target vocabulary files")->expected(2)->required();
    qe->add_option("--src", qe_src, "source corpus")->required();
    qe->add_option("--tgt", qe_tgt, "synthetic target corpus")->required();
    qe->add_option("--out", qe_out, "output scores TSV")->required();
    qe->callback([&]() {
        Checkpoint ckpt = load_checkpoint(qe_ckpt);
        MergeTable merges = load_merges(qe_merges);
        VocabPair vocab = load_vocab_pair(qe_vocab);
        std::vector<std::string> src = load_lines(qe_src);
        std::vector<std::string> tgt = load_lines(qe_tgt);
        ConfidenceEstimator estimator(ckpt.config, ckpt.params, merges, vocab.src, vocab.tgt);
        save_scores(qe_out, score_corpus(estimator, src, tgt, 1));
    });

    // evaluate
    std::string ev_ckpt, ev_merges, ev_src, ev_tgt;
    std::vector<std::string> ev_vocab;
    int ev_beam = 1;
    auto* ev = app.add_subcommand("evaluate", "BLEU-score a checkpoint against references");
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--merges", ev_merges, "merge table")->required();
    ev->add_option("--vocab", ev_vocab, "source and target vocabulary files")->expected(2)->required();
    ev->add_option("--src", ev_src, "evaluation sources")->required();
    ev->add_option("--tgt", ev_tgt, "references")->required();
    ev->add_option("--beam", ev_beam, "beam width (1 = greedy)");
    ev->callback([&]() {
        Checkpoint ckpt = load_checkpoint(ev_ckpt);
        MergeTable merges = load_merges(ev_merges);
        VocabPair vocab = load_vocab_pair(ev_vocab);
        BleuReport report = evaluate_model(ckpt.config, ckpt.params, load_lines(ev_src), load_lines(ev_tgt),
                                           merges, vocab.src, vocab.tgt, ev_beam, 1);
        std::cout << report.to_json() << "\n";
    });

    // selftrain
    std::string st_config, st_out;
    std::optional<std::uint64_t> st_seed;
    auto* st = app.add_subcommand("selftrain", "Run the full single-round self-training pipeline");
    st->add_option("--config", st_config, "experiment config (key=value)")->required();
    st->add_option("--seed", st_seed, "override the config seed");
    st->add_option("--out", st_out, "output directory")->required();
    st->callback([&]() { run_selftrain(config_with_seed(st_config, st_seed), st_out); });

    // iterate
    std::string it_config, it_out;
    std::optional<std::uint64_t> it_seed;
    auto* it = app.add_subcommand("iterate", "Run the iterative multi-round schedule");
    it->add_option("--config", it_config, "experiment config (key=value)")->required();
    it->add_option("--seed", it_seed, "override the config seed");
    it->add_option("--out", it_out, "output directory")->required();
    it->callback([&]() { run_iterative(config_with_seed(it_config, it_seed), it_out); });

    // report
    std::vector<std::string> rp_manifests;
    std::string rp_out;
    auto* rp = app.add_subcommand("report", "Summarize run manifests into a TSV and an SVG figure");
    rp->add_option("manifests", rp_manifests, "manifest.json files")->required();
    rp->add_option("--out", rp_out, "output directory")->required();
    rp->callback([&]() {
        std::vector<RunManifest> ms;
        ms.reserve(rp_manifests.size());
        for (const std::string& path : rp_manifests) ms.push_back(RunManifest::load(path));
        emit_report(ms, rp_out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace slnmt
