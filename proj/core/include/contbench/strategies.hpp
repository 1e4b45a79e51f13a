#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "contbench/data.hpp"
#include "contbench/linalg.hpp"
#include "contbench/nn.hpp"
#include "contbench/rng.hpp"

namespace contbench {

enum class StrategyKind { FineTune, Ewc, EwcKfac, Ogd, Rehearsal };

std::string to_string(StrategyKind kind);
StrategyKind parse_strategy(const std::string& name);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::FineTune;
    double lambda = 0.0;  // importance parameter; applied by the caller
    int ogd_memory_per_task = 100;
    int ogd_basis_cap = 300;
    int buffer_per_class = 100;
};

/// One training sample routed to a specific head (replayed samples keep the
/// head they were trained under).
struct TrainExample {
    Vector x;
    int local_label = 0;  // row within its head
    int head_index = 0;
};
using Batch = std::vector<TrainExample>;

/// Quadratic-penalty memory of one finished task: parameter snapshot plus
/// the empirical diagonal Fisher. Head entries cover only the rows that
/// existed at consolidation time.
struct EwcAnchor {
    std::vector<Matrix> trunk_star;
    std::vector<Matrix> trunk_fisher;
    Matrix head_star;
    Matrix head_fisher;
    int head_index = 0;
    int head_rows = 0;
};

/// Kronecker factors of one layer: its Fisher block is approximated as
/// A_factor (x) G_factor with A = E[a a^T] over inputs (homogeneous 1
/// appended) and G = E[d d^T] over pre-activation gradients.
struct KfacLayerFactors {
    Matrix w_star;
    Matrix a_factor;  // (in+1) x (in+1)
    Matrix g_factor;  // out x out
};

struct KfacAnchor {
    std::vector<KfacLayerFactors> trunk;
    KfacLayerFactors head;
    int head_index = 0;
    int head_rows = 0;
};

/// Orthonormal basis of flattened trunk-gradient directions; new-task
/// gradients are projected onto its orthogonal complement.
struct OgdState {
    std::vector<Vector> basis;
    int cap = 0;
};

/// g <- g - sum_j <g,v_j> v_j.
void ogd_project(const OgdState& state, Vector& g);

/// max_j |<projected g, v_j>| — diagnostic for the projection contract.
double project_is_orthogonal_check(const OgdState& state, Vector g);

/// Flattened trunk part of a gradient/parameter set, layer by layer.
Vector flatten_trunk(const std::vector<Matrix>& mats);

struct StoredExample {
    Vector x;
    int global_label = 0;
    int local_label = 0;
    int head_index = 0;
};

/// Per-global-class reservoir of raw samples.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(int per_class) : per_class_(per_class) {}

    void insert(StoredExample example, Rng& rng);
    size_t total() const;
    bool empty() const { return total() == 0; }
    const StoredExample& sample_uniform(Rng& rng) const;

    int per_class() const { return per_class_; }
    const std::map<int, std::vector<StoredExample>>& slots() const { return slots_; }
    const std::map<int, long>& seen_counts() const { return seen_; }
    // Serialization access.
    std::map<int, long>& seen_counts_mutable() { return seen_; }
    std::map<int, std::vector<StoredExample>>& slots_mutable() { return slots_; }

  private:
    int per_class_ = 0;
    std::map<int, std::vector<StoredExample>> slots_;
    std::map<int, long> seen_;
};

/// One continual-learning strategy: accumulates memory at task boundaries
/// (consolidate) and shapes training in between (penalty gradient, gradient
/// projection, or batch composition).
class Strategy {
  public:
    Strategy(StrategyConfig config, uint64_t seed);

    const StrategyConfig& config() const { return config_; }
    uint64_t seed() const { return seed_; }

    /// Called once at the end of each task with that task's training data.
    void consolidate(const MlpModel& model, const Dataset& task_train, const TaskSpec& spec,
                     int head_index);

    /// The remembering loss Omega (lambda NOT applied).
    double penalty_value(const MlpModel& model) const;

    /// Adds the penalty gradient (EWC variants) or projects (OGD) in place.
    void regularize_gradient(const MlpModel& model, Gradients& grads, double lambda) const;

    /// Rehearsal: each slot keeps the current sample or swaps in a buffer
    /// draw with probability 1/2. Other strategies: identity.
    Batch compose_batch(Batch current, Rng& rng) const;

    const std::vector<EwcAnchor>& ewc_anchors() const { return ewc_anchors_; }
    const std::vector<KfacAnchor>& kfac_anchors() const { return kfac_anchors_; }
    const OgdState& ogd_state() const { return ogd_; }
    const ReplayBuffer& buffer() const { return buffer_; }

    // Serialization access.
    std::vector<EwcAnchor>& ewc_anchors_mutable() { return ewc_anchors_; }
    std::vector<KfacAnchor>& kfac_anchors_mutable() { return kfac_anchors_; }
    OgdState& ogd_state_mutable() { return ogd_; }
    ReplayBuffer& buffer_mutable() { return buffer_; }

  private:
    void consolidate_ewc(const MlpModel& model, const Dataset& data, int head_index);
    void consolidate_kfac(const MlpModel& model, const Dataset& data, int head_index);
    void consolidate_ogd(const MlpModel& model, const Dataset& data, int head_index);
    void consolidate_rehearsal(const Dataset& data, const TaskSpec& spec, int head_index);

    StrategyConfig config_;
    uint64_t seed_ = 0;
    Rng rng_;  // buffer insertion + OGD sample choice
    std::vector<EwcAnchor> ewc_anchors_;
    std::vector<KfacAnchor> kfac_anchors_;
    OgdState ogd_;
    ReplayBuffer buffer_;
};

}  // namespace contbench
