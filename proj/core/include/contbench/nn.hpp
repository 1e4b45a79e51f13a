#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "contbench/linalg.hpp"

namespace contbench {

struct MlpConfig {
    int input_dim = 784;
    std::vector<int> hidden_sizes = {256, 256};
    uint64_t init_seed = 0;

    int latent_dim() const { return hidden_sizes.back(); }
    void validate() const;
};

/// Output layer over a contiguous block of global classes. Row i scores
/// global class class_offset + i. The bias sits in the last weight column.
struct Head {
    Matrix weight;  // n_classes x (latent_dim + 1)
    int class_offset = 0;

    int n_classes() const { return weight.rows; }
};

/// ReLU MLP trunk (the feature extractor) plus one or more linear heads.
/// Every trunk weight carries its bias as a trailing column; layer l maps
/// dims[l]+1 -> dims[l+1].
struct MlpModel {
    MlpConfig config;
    std::vector<Matrix> trunk;
    std::vector<Head> heads;

    bool single_head() const { return heads.size() == 1; }
    size_t trunk_param_count() const;
    bool all_finite() const;
};

/// Intermediates of one forward pass: per trunk layer the input with the
/// homogeneous 1 appended and the pre-activation, plus the final latent.
struct ForwardCache {
    std::vector<Vector> inputs;    // inputs[l] has size dims[l]+1
    std::vector<Vector> preacts;   // preacts[l] has size dims[l+1]
    Vector latent;                 // post-ReLU last hidden
    Vector head_input;             // [latent; 1]
};

struct Gradients {
    std::vector<Matrix> trunk;
    Matrix head;
    int head_index = 0;
};

MlpModel init(const MlpConfig& config, int n_initial_classes);

std::pair<Vector, ForwardCache> forward(const MlpModel& model, const Vector& x, int head_index);
void forward_into(const MlpModel& model, const Vector& x, int head_index, Vector& logits,
                  ForwardCache& cache);

/// Logits without building a cache; the evaluation fast path.
Vector predict_logits(const MlpModel& model, const Vector& x, int head_index);

/// Softmax cross entropy against a head-local target.
/// Returns (loss, dloss/dlogits).
std::pair<double, Vector> loss_ce(const Vector& logits, int target_local);

/// Exact gradients w.r.t. trunk weights and the active head's weight.
/// When deltas_out is non-null it receives the per-trunk-layer
/// pre-activation gradients (consumed by the KFAC factors).
Gradients backward(const MlpModel& model, const ForwardCache& cache, const Vector& dlogits,
                   int head_index, std::vector<Vector>* deltas_out = nullptr);

/// Accumulating variant for batch loops: adds this sample's gradients into
/// acc (acc must be zero_gradients_like-shaped for the same head).
void backward_accumulate(const MlpModel& model, const ForwardCache& cache, const Vector& dlogits,
                         int head_index, Gradients& acc,
                         std::vector<Vector>* deltas_out = nullptr);

Gradients zero_gradients_like(const MlpModel& model, int head_index);
void scale_gradients(Gradients& grads, double factor);

void sgd_step(MlpModel& model, const Gradients& grads, double lr);

/// Appends rows to the single head; existing rows are bit-unchanged.
void expand_head(MlpModel& model, int n_new_classes, uint64_t seed);

/// Appends an independent head; returns its index.
int add_head(MlpModel& model, int n_classes, int class_offset, uint64_t seed);

/// The feature extractor output phi(x; theta).
Vector latent(const MlpModel& model, const Vector& x);

}  // namespace contbench
