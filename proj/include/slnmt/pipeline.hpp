#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slnmt/model.hpp"

namespace slnmt {

// Which of data selection and quality estimation the self-training run uses.
enum class Method { kSl, kSlDs, kSlQe, kSlDsQe };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct ScheduleStage {
    std::size_t select_n = 0;  // cumulative selected monolingual sentences
    std::size_t keep_m = 0;    // cumulative kept synthetic pairs
};

struct ExperimentConfig {
    // Corpus paths
    std::string train_src, train_tgt, mono_src, dev_src, dev_tgt, test_src, test_tgt;
    Method method = Method::kSlDsQe;

    // Subwords and vocab
    int bpe_merges = 200;
    int vocab_max = 50000;

    // Selection
    int nmax = 3;
    double decay = 0.5;

    // One stage for selftrain; multiple cumulative stages for iterate.
    std::vector<ScheduleStage> schedule;

    ModelConfig model;

    // Training control
    double learning_rate = 2e-4;
    long max_steps = 1000;
    long eval_interval = 100;
    double stop_threshold = 0.2;
    int stop_window = 4;
    int average_last = 8;
    int eval_beam = 5;   // test-set decoding
    int synth_beam = 1;  // synthetic-data decoding
    int threads = 1;
    std::uint64_t seed = 1;

    std::map<std::string, std::string> raw;  // snapshot of the parsed file

    void validate() const;
    static ExperimentConfig from_kv(const std::map<std::string, std::string>& kv);
    static ExperimentConfig from_file(const std::string& path);
};

// n = ceil(total * num / den); the slice arithmetic behind "best third" style
// fractions.
std::size_t fraction_ceil(std::size_t total, std::size_t num, std::size_t den);

struct StageRecord {
    std::string name;
    std::size_t authentic_count = 0;
    std::size_t mono_count = 0;
    std::size_t selected_count = 0;
    std::size_t kept_count = 0;
    std::optional<double> pretrain_bleu;  // averaged pre-train model on test
    double finetune_bleu = 0.0;           // averaged final model on test
    double best_bleu = 0.0;               // best single checkpoint on test
    long best_step = 0;
    long final_step = 0;
    std::vector<std::string> checkpoints;
    std::map<std::string, std::string> hashes;
    double wall_seconds = 0.0;
};

struct RunManifest {
    std::map<std::string, std::string> config;
    std::vector<StageRecord> stages;

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);
    void save(const std::string& path) const;
    static RunManifest load(const std::string& path);

    // Canonical form with timing removed, for determinism comparisons.
    std::string to_json_without_timing() const;
};

// Train on the authentic parallel data alone; averages the last checkpoints
// and reports best-single and averaged test BLEU.
RunManifest run_baseline(const ExperimentConfig& config, const std::string& out_dir);

// Full single-round pipeline: select, self-translate, QE-filter, pre-train on
// the kept synthetic pairs, fine-tune on the authentic data.
RunManifest run_selftrain(const ExperimentConfig& config, const std::string& out_dir);

// Multi-round schedule; each round extends the selected pool with next_slice
// semantics, re-translates only the new slice with the latest model, and
// retrains from fresh initialization on everything kept so far.
RunManifest run_iterative(const ExperimentConfig& config, const std::string& out_dir);

// TSV summary plus a dual-axis quantity-vs-quality SVG.
void emit_report(const std::vector<RunManifest>& manifests, const std::string& out_dir);

}  // namespace slnmt
