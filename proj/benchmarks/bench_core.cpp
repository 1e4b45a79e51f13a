#include <benchmark/benchmark.h>

#include <utility>
#include <vector>

#include "contbench/data.hpp"
#include "contbench/eval.hpp"
#include "contbench/linalg.hpp"
#include "contbench/nn.hpp"
#include "contbench/rng.hpp"
#include "contbench/strategies.hpp"

using namespace contbench;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.values) v = rng.normal();
    return m;
}

Vector random_vector(size_t n, Rng& rng) {
    Vector v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

// MNIST-shaped model: 784 -> 256 -> 256 -> 10.
MlpModel bench_model() {
    MlpConfig config;
    config.input_dim = 784;
    config.hidden_sizes = {256, 256};
    config.init_seed = 17;
    return init(config, 10);
}

Dataset random_dataset(int n, int n_classes, Rng& rng) {
    Dataset data;
    for (int i = 0; i < n; ++i) {
        data.images.push_back(random_vector(784, rng));
        data.labels.push_back(i % n_classes);
    }
    return data;
}

TaskSpec bench_spec() {
    TaskSpec spec;
    spec.task_label = 0;
    spec.dataset_name = "synthetic";
    spec.n_classes = 10;
    spec.class_offset = 0;
    return spec;
}

Strategy consolidated_strategy(StrategyKind kind, const MlpModel& model) {
    Rng rng(29);
    const Dataset data = random_dataset(64, 10, rng);
    Strategy strategy({kind, 0.0}, 31);
    strategy.consolidate(model, data, bench_spec(), 0);
    return strategy;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
    Rng rng(3);
    const Matrix a = random_matrix(256, 784, rng);
    const Matrix b = random_matrix(784, 32, rng);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_Matmul);

static void BM_ForwardBackward(benchmark::State& state) {
    const MlpModel model = bench_model();
    Rng rng(5);
    const Vector x = random_vector(784, rng);
    for (auto _ : state) {
        auto [logits, cache] = forward(model, x, 0);
        auto [loss, dlogits] = loss_ce(logits, 3);
        benchmark::DoNotOptimize(backward(model, cache, dlogits, 0));
        benchmark::DoNotOptimize(loss);
    }
}
BENCHMARK(BM_ForwardBackward);

// Per-step cost of adding lambda * F (theta - theta*) to a gradient.
static void BM_EwcPenaltyGradient(benchmark::State& state) {
    const MlpModel model = bench_model();
    const Strategy strategy = consolidated_strategy(StrategyKind::Ewc, model);
    Gradients grads = zero_gradients_like(model, 0);
    for (auto _ : state) {
        strategy.regularize_gradient(model, grads, 1000.0);
        benchmark::DoNotOptimize(grads.trunk[0].values.data());
    }
}
BENCHMARK(BM_EwcPenaltyGradient);

// Per-step cost of the Kronecker-factored penalty gradient G dW A per layer.
static void BM_KfacPenaltyGradient(benchmark::State& state) {
    const MlpModel model = bench_model();
    const Strategy strategy = consolidated_strategy(StrategyKind::EwcKfac, model);
    Gradients grads = zero_gradients_like(model, 0);
    for (auto _ : state) {
        strategy.regularize_gradient(model, grads, 10.0);
        benchmark::DoNotOptimize(grads.trunk[0].values.data());
    }
}
BENCHMARK(BM_KfacPenaltyGradient);

static void BM_GramSchmidtExtend(benchmark::State& state) {
    const size_t dim = 4096;
    Rng rng(7);
    std::vector<Vector> basis;
    while (basis.size() < 64) {
        if (auto u = gram_schmidt_extend(basis, random_vector(dim, rng)))
            basis.push_back(std::move(*u));
    }
    for (auto _ : state) {
        state.PauseTiming();
        const Vector v = random_vector(dim, rng);
        state.ResumeTiming();
        benchmark::DoNotOptimize(gram_schmidt_extend(basis, v));
    }
}
BENCHMARK(BM_GramSchmidtExtend);

static void BM_TsneJointProbabilities(benchmark::State& state) {
    Rng rng(9);
    std::vector<Vector> points;
    for (int i = 0; i < 200; ++i) points.push_back(random_vector(64, rng));
    for (auto _ : state) benchmark::DoNotOptimize(tsne_joint_probabilities(points, 30.0));
}
BENCHMARK(BM_TsneJointProbabilities);

BENCHMARK_MAIN();
