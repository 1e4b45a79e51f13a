#include "contbench/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>

#include "contbench/checkpoint.hpp"
#include "contbench/errors.hpp"
#include "contbench/nn.hpp"
#include "contbench/rng.hpp"

namespace contbench {

double ExperimentConfig::effective_lambda() const {
    if (lambda >= 0.0) return lambda;
    switch (strategy) {
        case StrategyKind::Ewc: return 1000.0;
        case StrategyKind::EwcKfac: return 10.0;
        default: return 0.0;
    }
}

void ExperimentConfig::validate() const {
    if (scenario != "fellowship" && scenario != "blobs")
        throw UsageError("unknown scenario '" + scenario + "' (expected fellowship or blobs)");
    if (lr <= 0.0) throw UsageError("lr must be > 0");
    if (epochs_per_task < 1) throw UsageError("epochs must be >= 1");
    if (batch_size < 1) throw UsageError("batch-size must be >= 1");
    if (subsample < 0) throw UsageError("subsample must be >= 0 (0 = full size)");
}

Continuum build_continuum(const ExperimentConfig& config) {
    if (config.scenario == "blobs")
        return synthetic_blobs(config.blob_tasks, config.blob_classes_per_task, config.blob_dim,
                               config.blob_n_per_class, derive_seed(config.seed, "data"),
                               config.setting);
    return build_fellowship(config.data_root, config.setting, config.subsample,
                            config.test_subsample(), derive_seed(config.seed, "data"));
}

namespace {

// Mean-gradient step over one composed batch. Replayed samples may target
// other heads; per-head sums are applied as one combined update (plain SGD
// makes the split exact).
void train_step(MlpModel& model, const Batch& batch, const Strategy& strategy, double lambda,
                double lr) {
    if (batch.empty()) return;

    std::map<int, Gradients> per_head;
    Vector logits;
    ForwardCache cache;
    for (const TrainExample& ex : batch) {
        forward_into(model, ex.x, ex.head_index, logits, cache);
        auto [loss, dlogits] = loss_ce(logits, ex.local_label);
        auto it = per_head.find(ex.head_index);
        if (it == per_head.end())
            it = per_head.emplace(ex.head_index, zero_gradients_like(model, ex.head_index)).first;
        backward_accumulate(model, cache, dlogits, ex.head_index, it->second);
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& [head, grads] : per_head) scale_gradients(grads, inv);

    if (per_head.size() == 1) {
        Gradients& grads = per_head.begin()->second;
        strategy.regularize_gradient(model, grads, lambda);
        sgd_step(model, grads, lr);
        return;
    }
    // Multiple heads only happens under rehearsal replay, whose
    // regularization is the identity.
    for (auto& [head, grads] : per_head) sgd_step(model, grads, lr);
}

void write_resolved_config(const ExperimentConfig& config, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write " + path);
    std::string text;
    auto kv = [&text](const std::string& k, const std::string& v) { text += k + "=" + v + "\n"; };
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%g", v);
        return std::string(buf);
    };

    kv("scenario", config.scenario);
    kv("setting", to_string(config.setting));
    kv("strategy", to_string(config.strategy));
    kv("lambda", num(config.effective_lambda()));
    kv("lr", num(config.lr));
    kv("epochs", std::to_string(config.epochs_per_task));
    kv("batch-size", std::to_string(config.batch_size));
    kv("seed", std::to_string(config.seed));
    kv("subsample", std::to_string(config.subsample));
    kv("subsample-test", std::to_string(config.test_subsample()));
    kv("data-root", config.data_root);
    kv("out", config.out_dir);
    std::string hidden;
    for (size_t i = 0; i < config.hidden_sizes.size(); ++i)
        hidden += (i ? "," : "") + std::to_string(config.hidden_sizes[i]);
    kv("hidden-sizes", hidden);
    kv("ogd-memory-per-task", std::to_string(config.ogd_memory_per_task));
    kv("ogd-basis-cap", std::to_string(config.ogd_basis_cap));
    kv("buffer-per-class", std::to_string(config.buffer_per_class));
    if (config.scenario == "blobs") {
        kv("blob-tasks", std::to_string(config.blob_tasks));
        kv("blob-classes-per-task", std::to_string(config.blob_classes_per_task));
        kv("blob-dim", std::to_string(config.blob_dim));
        kv("blob-n-per-class", std::to_string(config.blob_n_per_class));
    }

    const bool bad = std::fwrite(text.data(), 1, text.size(), f) != text.size();
    std::fclose(f);
    if (bad) throw IoError("write failed on " + path);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);

    const Continuum continuum = build_continuum(config);
    const double lambda = config.effective_lambda();

    MlpConfig mlp_config;
    mlp_config.input_dim = continuum.input_dim;
    mlp_config.hidden_sizes = config.hidden_sizes;
    mlp_config.init_seed = derive_seed(config.seed, "init");
    MlpModel model = init(mlp_config, continuum.tasks[0].spec.n_classes);

    StrategyConfig strat_config;
    strat_config.kind = config.strategy;
    strat_config.lambda = lambda;
    strat_config.ogd_memory_per_task = config.ogd_memory_per_task;
    strat_config.ogd_basis_cap = config.ogd_basis_cap;
    strat_config.buffer_per_class = config.buffer_per_class;
    Strategy strategy(strat_config, derive_seed(config.seed, "strategy"));
    Rng compose_rng(derive_seed(config.seed, "compose"));

    ExperimentResult result;
    int step = 0;
    for (int t = 0; t < continuum.n_tasks(); ++t) {
        const TaskData& task = continuum.tasks[static_cast<size_t>(t)];
        if (t > 0) {
            if (config.setting == Setting::SingleHead)
                expand_head(model, task.spec.n_classes,
                            derive_seed(config.seed, "head", static_cast<uint64_t>(t)));
            else
                add_head(model, task.spec.n_classes, continuum.global_offset(t),
                         derive_seed(config.seed, "head", static_cast<uint64_t>(t)));
        }
        const int head_index = config.setting == Setting::SingleHead ? 0 : t;

        for (int epoch = 0; epoch < config.epochs_per_task; ++epoch) {
            const uint64_t shuffle_seed = derive_seed(
                config.seed, "shuffle",
                static_cast<uint64_t>(t) * static_cast<uint64_t>(config.epochs_per_task) +
                    static_cast<uint64_t>(epoch));
            for (const std::vector<int>& indices :
                 iterate_batches(task.train.size(), config.batch_size, shuffle_seed)) {
                Batch batch;
                batch.reserve(indices.size());
                for (int i : indices)
                    batch.push_back({task.train.images[static_cast<size_t>(i)],
                                     task.train.labels[static_cast<size_t>(i)], head_index});
                batch = strategy.compose_batch(std::move(batch), compose_rng);
                train_step(model, batch, strategy, lambda, config.lr);
            }
            if (!model.all_finite())
                throw NumericError("training diverged to non-finite parameters (task " +
                                   std::to_string(t) + ", epoch " + std::to_string(epoch) + ")");

            const EvalResult eval = evaluate(model, continuum, config.setting);
            MetricsRow row;
            row.step = ++step;
            row.tasks_trained = t + 1;
            row.strategy = to_string(config.strategy);
            row.setting = to_string(config.setting);
            row.seed = config.seed;
            row.acc_global = eval.acc_global;
            row.acc_per_task = eval.acc_per_task;
            row.penalty = strategy.penalty_value(model);
            result.rows.push_back(std::move(row));
        }

        strategy.consolidate(model, task.train, task.spec, head_index);
    }

    result.final_acc_global = result.rows.back().acc_global;
    result.final_acc_per_task = result.rows.back().acc_per_task;
    result.metrics_path = config.out_dir + "/metrics.csv";
    result.checkpoint_path = config.out_dir + "/checkpoint";
    result.config_path = config.out_dir + "/resolved_config";
    write_metrics_csv(result.rows, result.metrics_path);
    save_checkpoint(model, strategy, result.checkpoint_path);
    write_resolved_config(config, result.config_path);
    return result;
}

SuiteResult run_suite(const ExperimentConfig& base) {
    static const StrategyKind kStrategies[] = {StrategyKind::FineTune, StrategyKind::Ewc,
                                               StrategyKind::EwcKfac, StrategyKind::Ogd,
                                               StrategyKind::Rehearsal};
    static const Setting kSettings[] = {Setting::SingleHead, Setting::MultiHead};

    SuiteResult suite;
    std::vector<MetricsRow> merged;
    for (Setting setting : kSettings) {
        for (StrategyKind strategy : kStrategies) {
            SuiteRun run;
            run.strategy = strategy;
            run.setting = setting;
            run.name = to_string(strategy) + "-" + to_string(setting);

            ExperimentConfig config = base;
            config.strategy = strategy;
            config.setting = setting;
            config.out_dir = base.out_dir + "/" + run.name;
            try {
                run.result = run_experiment(config);
                run.ok = true;
                merged.insert(merged.end(), run.result.rows.begin(), run.result.rows.end());
            } catch (const std::exception& e) {
                run.ok = false;
                run.error = e.what();
            }
            suite.runs.push_back(std::move(run));
        }
    }

    std::filesystem::create_directories(base.out_dir);
    suite.merged_csv_path = base.out_dir + "/suite_metrics.csv";
    write_metrics_csv(merged, suite.merged_csv_path);
    return suite;
}

TsneDumpResult run_tsne_dump(const std::string& checkpoint_path, const ExperimentConfig& config,
                             int n_points, double perplexity, int iters) {
    config.validate();
    LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
    const Continuum continuum = build_continuum(config);
    if (loaded.model.config.input_dim != continuum.input_dim)
        throw DataFormatError("checkpoint expects input dim " +
                              std::to_string(loaded.model.config.input_dim) + " but scenario '" +
                              config.scenario + "' provides " +
                              std::to_string(continuum.input_dim));

    const LatentSample sample =
        sample_latents(loaded.model, continuum, n_points, derive_seed(config.seed, "tsne-sample"));
    const TsneResult embedded =
        tsne(sample.latents, perplexity, iters, derive_seed(config.seed, "tsne"));

    TsneDumpResult out;
    out.kl_initial = embedded.kl_initial;
    out.kl_final = embedded.kl_final;
    for (int i = 0; i < embedded.coords.rows; ++i)
        out.dump.push_back({embedded.coords(i, 0), embedded.coords(i, 1),
                            sample.task_labels[static_cast<size_t>(i)],
                            sample.class_labels[static_cast<size_t>(i)]});

    std::filesystem::create_directories(config.out_dir);
    out.embedding_path = config.out_dir + "/embedding.csv";
    out.svg_path = config.out_dir + "/scatter.svg";
    write_embedding_csv(out.dump, out.embedding_path);
    write_embedding_svg(out.dump, out.svg_path);
    return out;
}

void write_embedding_svg(const EmbeddingDump& dump, const std::string& path) {
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
    constexpr int kSize = 640;
    constexpr int kMargin = 40;

    double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
    if (!dump.empty()) {
        min_x = max_x = dump[0].x;
        min_y = max_y = dump[0].y;
        for (const EmbeddingPoint& p : dump) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
    }
    const double span_x = std::max(max_x - min_x, 1e-9);
    const double span_y = std::max(max_y - min_y, 1e-9);

    int max_task = 0;
    for (const EmbeddingPoint& p : dump) max_task = std::max(max_task, p.task_label);

    std::string svg;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                  "viewBox=\"0 0 %d %d\">\n",
                  kSize, kSize, kSize, kSize);
    svg += buf;
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const EmbeddingPoint& p : dump) {
        const double cx = kMargin + (p.x - min_x) / span_x * (kSize - 2 * kMargin);
        const double cy = kSize - kMargin - (p.y - min_y) / span_y * (kSize - 2 * kMargin);
        std::snprintf(buf, sizeof buf,
                      "<circle class=\"pt\" cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", cx,
                      cy, kColors[p.task_label % 5]);
        svg += buf;
    }
    for (int t = 0; t <= max_task; ++t) {
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%d\" y=\"%d\" width=\"10\" height=\"10\" fill=\"%s\"/>"
                      "<text x=\"%d\" y=\"%d\" font-size=\"12\">task %d</text>\n",
                      kMargin, kMargin / 4 + 14 * t, kColors[t % 5], kMargin + 14,
                      kMargin / 4 + 14 * t + 9, t);
        svg += buf;
    }
    svg += "</svg>\n";

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write " + path);
    const bool bad = std::fwrite(svg.data(), 1, svg.size(), f) != svg.size();
    std::fclose(f);
    if (bad) throw IoError("write failed on " + path);
}

}  // namespace contbench
