#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "contbench/data.hpp"
#include "contbench/eval.hpp"
#include "contbench/strategies.hpp"

namespace contbench {

struct ExperimentConfig {
    std::string scenario = "fellowship";  // fellowship | blobs
    Setting setting = Setting::SingleHead;
    StrategyKind strategy = StrategyKind::FineTune;
    double lambda = -1.0;  // < 0: per-strategy default (ewc 1000, ewc-kfac 10, else 0)
    double lr = 2e-3;
    int epochs_per_task = 5;
    int batch_size = 64;
    uint64_t seed = 1;
    int subsample = 5000;  // training samples per task; 0 = full size
    std::string data_root = "data";
    std::string out_dir = "out";

    std::vector<int> hidden_sizes = {256, 256};
    int ogd_memory_per_task = 100;
    int ogd_basis_cap = 300;
    int buffer_per_class = 100;

    // blob-scenario shape
    int blob_tasks = 3;
    int blob_classes_per_task = 2;
    int blob_dim = 2;
    int blob_n_per_class = 250;

    double effective_lambda() const;
    /// Test subsample follows the 5000-train/2000-test desk-scale ratio.
    int test_subsample() const { return subsample == 0 ? 0 : subsample * 2 / 5; }
    void validate() const;
};

struct ExperimentResult {
    std::vector<MetricsRow> rows;
    double final_acc_global = 0.0;
    std::vector<double> final_acc_per_task;
    std::string metrics_path;
    std::string checkpoint_path;
    std::string config_path;
};

Continuum build_continuum(const ExperimentConfig& config);

/// Full run: per task (expand or add a head, epochs of compose -> forward ->
/// loss -> backward -> regularize -> step, evaluating after every epoch,
/// consolidating at the end), then metrics.csv + checkpoint +
/// resolved_config under out_dir. Deterministic given the config.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct SuiteRun {
    std::string name;
    StrategyKind strategy;
    Setting setting;
    bool ok = false;
    std::string error;
    ExperimentResult result;
};

struct SuiteResult {
    std::vector<SuiteRun> runs;
    std::string merged_csv_path;
};

/// The cross product {finetune, ewc, ewc-kfac, ogd, rehearsal} x
/// {single-head, multi-head} with a shared seed; failures are recorded and
/// the suite continues.
SuiteResult run_suite(const ExperimentConfig& base);

struct TsneDumpResult {
    EmbeddingDump dump;
    double kl_initial = 0.0;
    double kl_final = 0.0;
    std::string embedding_path;
    std::string svg_path;
};

/// Loads a checkpoint, samples n_points test latents, embeds them with
/// t-SNE, and writes embedding.csv plus a task-colored SVG scatter.
TsneDumpResult run_tsne_dump(const std::string& checkpoint_path, const ExperimentConfig& config,
                             int n_points = 200, double perplexity = 30.0, int iters = 1000);

void write_embedding_svg(const EmbeddingDump& dump, const std::string& path);

/// Downloads any missing fellowship IDX files into data_root and verifies
/// size and item counts; present-and-valid files are left untouched.
/// base_url_overrides keys: mnist, fashion, kmnist.
void fetch_datasets(const std::string& data_root,
                    const std::map<std::string, std::string>& base_url_overrides = {});

}  // namespace contbench
