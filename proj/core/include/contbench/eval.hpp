#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "contbench/data.hpp"
#include "contbench/linalg.hpp"
#include "contbench/nn.hpp"

namespace contbench {

struct MetricsRow {
    int step = 0;           // epochs completed across all tasks
    int tasks_trained = 0;  // tasks started so far
    std::string strategy;
    std::string setting;
    uint64_t seed = 0;
    double acc_global = 0.0;
    std::vector<double> acc_per_task;
    double penalty = 0.0;  // remembering loss Omega, before lambda
};

struct EvalResult {
    double acc_global = 0.0;
    std::vector<double> acc_per_task;
};

/// Argmax over every class seen so far; deliberately takes no task label.
int predict_single_head(const MlpModel& model, const Vector& x);

/// The task label selects the head; argmax over its local classes.
int predict_multi_head(const MlpModel& model, const Vector& x, int task_label);

/// Accuracy over the concatenation of all tasks' test sets, plus per-task
/// accuracies. Tasks whose head does not exist yet score 0.
EvalResult evaluate(const MlpModel& model, const Continuum& continuum, Setting setting);

struct LatentSample {
    std::vector<Vector> latents;
    std::vector<int> task_labels;
    std::vector<int> class_labels;  // global class ids
};

/// n test points uniform without replacement over the concatenated test
/// sets, deterministic in seed.
LatentSample sample_latents(const MlpModel& model, const Continuum& continuum, int n,
                            uint64_t seed);

struct TsneResult {
    Matrix coords;  // n x 2
    double kl_initial = 0.0;
    double kl_final = 0.0;
};

/// Exact O(n^2) t-SNE: per-point bandwidth by bisection to entropy
/// ln(perplexity) +- 1e-5, symmetrized P, Student-t affinities, gradient
/// descent with early exaggeration x4 (first 100 iters), step 200, momentum
/// 0.5 switching to 0.8 at iter 250.
TsneResult tsne(const std::vector<Vector>& points, double perplexity, int iters, uint64_t seed);

/// The symmetrized joint distribution P (sums to 1). Exposed so tests can
/// check the entropy and normalization contracts directly.
Matrix tsne_joint_probabilities(const std::vector<Vector>& points, double perplexity);

/// The row-stochastic conditionals p_{j|i} before symmetrization; each
/// row's entropy hits ln(perplexity) +- 1e-5 (bisection target).
Matrix tsne_conditional_probabilities(const std::vector<Vector>& points, double perplexity);

struct EmbeddingPoint {
    double x = 0.0;
    double y = 0.0;
    int task_label = 0;
    int class_label = 0;
};
using EmbeddingDump = std::vector<EmbeddingPoint>;

// CSV columns: step,tasks_trained,strategy,setting,seed,acc_global,
// acc_task0..N-1,penalty. Numbers carry 6 significant digits.
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);
// CSV columns: x,y,task_label,class_label.
void write_embedding_csv(const EmbeddingDump& dump, const std::string& path);

}  // namespace contbench
