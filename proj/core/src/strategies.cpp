#include "contbench/strategies.hpp"

#include <algorithm>
#include <numeric>

#include "contbench/errors.hpp"

namespace contbench {

std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::FineTune: return "finetune";
        case StrategyKind::Ewc: return "ewc";
        case StrategyKind::EwcKfac: return "ewc-kfac";
        case StrategyKind::Ogd: return "ogd";
        case StrategyKind::Rehearsal: return "rehearsal";
    }
    return "?";
}

StrategyKind parse_strategy(const std::string& name) {
    if (name == "finetune") return StrategyKind::FineTune;
    if (name == "ewc") return StrategyKind::Ewc;
    if (name == "ewc-kfac" || name == "kfac") return StrategyKind::EwcKfac;
    if (name == "ogd") return StrategyKind::Ogd;
    if (name == "rehearsal") return StrategyKind::Rehearsal;
    throw UsageError("unknown strategy '" + name +
                     "' (expected finetune|ewc|ewc-kfac|ogd|rehearsal)");
}

// ---- OGD helpers ---------------------------------------------------------

Vector flatten_trunk(const std::vector<Matrix>& mats) {
    size_t total = 0;
    for (const Matrix& m : mats) total += m.size();
    Vector flat;
    flat.reserve(total);
    for (const Matrix& m : mats) flat.insert(flat.end(), m.values.begin(), m.values.end());
    return flat;
}

void ogd_project(const OgdState& state, Vector& g) {
    for (const Vector& v : state.basis) {
        if (v.size() != g.size()) throw DimensionError("OGD basis/gradient length mismatch");
        const double c = dot(g, v);
        for (size_t i = 0; i < g.size(); ++i) g[i] -= c * v[i];
    }
}

double project_is_orthogonal_check(const OgdState& state, Vector g) {
    ogd_project(state, g);
    double worst = 0.0;
    for (const Vector& v : state.basis) worst = std::max(worst, std::abs(dot(g, v)));
    return worst;
}

// ---- ReplayBuffer --------------------------------------------------------

void ReplayBuffer::insert(StoredExample example, Rng& rng) {
    std::vector<StoredExample>& slot = slots_[example.global_label];
    long& seen = seen_[example.global_label];
    ++seen;
    if (static_cast<int>(slot.size()) < per_class_) {
        slot.push_back(std::move(example));
    } else {
        // Algorithm R: the k-th sample of the stream survives with
        // probability per_class/k.
        const int j = rng.uniform_int(static_cast<int>(seen));
        if (j < per_class_) slot[static_cast<size_t>(j)] = std::move(example);
    }
}

size_t ReplayBuffer::total() const {
    size_t n = 0;
    for (const auto& [cls, slot] : slots_) n += slot.size();
    return n;
}

const StoredExample& ReplayBuffer::sample_uniform(Rng& rng) const {
    const size_t n = total();
    if (n == 0) throw UsageError("cannot sample from an empty replay buffer");
    size_t k = static_cast<size_t>(rng.uniform_int(static_cast<int>(n)));
    for (const auto& [cls, slot] : slots_) {
        if (k < slot.size()) return slot[k];
        k -= slot.size();
    }
    return slots_.rbegin()->second.back();  // unreachable
}

// ---- Strategy ------------------------------------------------------------

Strategy::Strategy(StrategyConfig config, uint64_t seed)
    : config_(config), seed_(seed), rng_(seed), buffer_(config.buffer_per_class) {
    if (config_.lambda < 0) throw UsageError("lambda must be >= 0");
    ogd_.cap = config_.ogd_basis_cap;
}

void Strategy::consolidate(const MlpModel& model, const Dataset& task_train, const TaskSpec& spec,
                           int head_index) {
    if (task_train.empty()) throw UsageError("cannot consolidate on an empty task dataset");
    switch (config_.kind) {
        case StrategyKind::FineTune: return;
        case StrategyKind::Ewc: return consolidate_ewc(model, task_train, head_index);
        case StrategyKind::EwcKfac: return consolidate_kfac(model, task_train, head_index);
        case StrategyKind::Ogd: return consolidate_ogd(model, task_train, head_index);
        case StrategyKind::Rehearsal: return consolidate_rehearsal(task_train, spec, head_index);
    }
}

void Strategy::consolidate_ewc(const MlpModel& model, const Dataset& data, int head_index) {
    EwcAnchor anchor;
    anchor.head_index = head_index;
    anchor.trunk_star = model.trunk;
    anchor.head_star = model.heads[static_cast<size_t>(head_index)].weight;
    anchor.head_rows = anchor.head_star.rows;
    for (const Matrix& w : model.trunk) anchor.trunk_fisher.emplace_back(w.rows, w.cols);
    anchor.head_fisher = Matrix(anchor.head_star.rows, anchor.head_star.cols);

    Vector logits;
    ForwardCache cache;
    Gradients grads = zero_gradients_like(model, head_index);
    for (size_t i = 0; i < data.size(); ++i) {
        forward_into(model, data.images[i], head_index, logits, cache);
        auto [loss, dlogits] = loss_ce(logits, data.labels[i]);
        for (Matrix& m : grads.trunk) std::fill(m.values.begin(), m.values.end(), 0.0);
        std::fill(grads.head.values.begin(), grads.head.values.end(), 0.0);
        backward_accumulate(model, cache, dlogits, head_index, grads);

        for (size_t l = 0; l < grads.trunk.size(); ++l) {
            const std::vector<double>& g = grads.trunk[l].values;
            std::vector<double>& f = anchor.trunk_fisher[l].values;
            for (size_t p = 0; p < g.size(); ++p) f[p] += g[p] * g[p];
        }
        for (size_t p = 0; p < grads.head.values.size(); ++p)
            anchor.head_fisher.values[p] += grads.head.values[p] * grads.head.values[p];
    }

    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (Matrix& f : anchor.trunk_fisher)
        for (double& v : f.values) v *= inv_n;
    for (double& v : anchor.head_fisher.values) v *= inv_n;
    ewc_anchors_.push_back(std::move(anchor));
}

void Strategy::consolidate_kfac(const MlpModel& model, const Dataset& data, int head_index) {
    KfacAnchor anchor;
    anchor.head_index = head_index;
    const Matrix& head_w = model.heads[static_cast<size_t>(head_index)].weight;
    anchor.head_rows = head_w.rows;
    anchor.head.w_star = head_w;
    anchor.head.a_factor = Matrix(head_w.cols, head_w.cols);
    anchor.head.g_factor = Matrix(head_w.rows, head_w.rows);
    for (const Matrix& w : model.trunk) {
        KfacLayerFactors lf;
        lf.w_star = w;
        lf.a_factor = Matrix(w.cols, w.cols);
        lf.g_factor = Matrix(w.rows, w.rows);
        anchor.trunk.push_back(std::move(lf));
    }

    auto rank1_update = [](Matrix& m, const Vector& v) {
        for (int r = 0; r < m.rows; ++r) {
            const double vr = v[static_cast<size_t>(r)];
            if (vr == 0.0) continue;
            double* row = m.row_ptr(r);
            for (int c = 0; c < m.cols; ++c) row[c] += vr * v[static_cast<size_t>(c)];
        }
    };

    Vector logits;
    ForwardCache cache;
    Gradients grads = zero_gradients_like(model, head_index);
    std::vector<Vector> deltas;
    for (size_t i = 0; i < data.size(); ++i) {
        forward_into(model, data.images[i], head_index, logits, cache);
        auto [loss, dlogits] = loss_ce(logits, data.labels[i]);
        for (Matrix& m : grads.trunk) std::fill(m.values.begin(), m.values.end(), 0.0);
        std::fill(grads.head.values.begin(), grads.head.values.end(), 0.0);
        backward_accumulate(model, cache, dlogits, head_index, grads, &deltas);

        for (size_t l = 0; l < anchor.trunk.size(); ++l) {
            rank1_update(anchor.trunk[l].a_factor, cache.inputs[l]);
            rank1_update(anchor.trunk[l].g_factor, deltas[l]);
        }
        rank1_update(anchor.head.a_factor, cache.head_input);
        rank1_update(anchor.head.g_factor, dlogits);
    }

    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (KfacLayerFactors& lf : anchor.trunk) {
        for (double& v : lf.a_factor.values) v *= inv_n;
        for (double& v : lf.g_factor.values) v *= inv_n;
    }
    for (double& v : anchor.head.a_factor.values) v *= inv_n;
    for (double& v : anchor.head.g_factor.values) v *= inv_n;
    kfac_anchors_.push_back(std::move(anchor));
}

void Strategy::consolidate_ogd(const MlpModel& model, const Dataset& data, int head_index) {
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order);
    const int want = std::min<int>(config_.ogd_memory_per_task, static_cast<int>(data.size()));

    Vector logits;
    ForwardCache cache;
    for (int k = 0; k < want; ++k) {
        if (static_cast<int>(ogd_.basis.size()) >= ogd_.cap) break;
        const size_t i = static_cast<size_t>(order[static_cast<size_t>(k)]);
        forward_into(model, data.images[i], head_index, logits, cache);

        // Gradient of the ground-truth logit (not of the loss).
        Vector dlogits(logits.size(), 0.0);
        dlogits[static_cast<size_t>(data.labels[i])] = 1.0;
        const Gradients grads = backward(model, cache, dlogits, head_index);

        const Vector flat = flatten_trunk(grads.trunk);
        if (auto unit = gram_schmidt_extend(ogd_.basis, flat)) ogd_.basis.push_back(std::move(*unit));
    }
}

void Strategy::consolidate_rehearsal(const Dataset& data, const TaskSpec& spec, int head_index) {
    for (size_t i = 0; i < data.size(); ++i) {
        StoredExample ex;
        ex.x = data.images[i];
        ex.local_label = data.labels[i];
        ex.global_label = spec.task_label * spec.n_classes + (data.labels[i] - spec.class_offset);
        ex.head_index = head_index;
        buffer_.insert(std::move(ex), rng_);
    }
}

double Strategy::penalty_value(const MlpModel& model) const {
    double total = 0.0;

    for (const EwcAnchor& anchor : ewc_anchors_) {
        for (size_t l = 0; l < anchor.trunk_star.size(); ++l) {
            const std::vector<double>& theta = model.trunk[l].values;
            const std::vector<double>& star = anchor.trunk_star[l].values;
            const std::vector<double>& fisher = anchor.trunk_fisher[l].values;
            for (size_t p = 0; p < theta.size(); ++p) {
                const double d = theta[p] - star[p];
                total += 0.5 * fisher[p] * d * d;
            }
        }
        const Matrix& head = model.heads[static_cast<size_t>(anchor.head_index)].weight;
        for (int r = 0; r < anchor.head_rows; ++r) {
            const double* theta = head.row_ptr(r);
            const double* star = anchor.head_star.row_ptr(r);
            const double* fisher = anchor.head_fisher.row_ptr(r);
            for (int c = 0; c < head.cols; ++c) {
                const double d = theta[c] - star[c];
                total += 0.5 * fisher[c] * d * d;
            }
        }
    }

    for (const KfacAnchor& anchor : kfac_anchors_) {
        for (size_t l = 0; l < anchor.trunk.size(); ++l) {
            const KfacLayerFactors& lf = anchor.trunk[l];
            Matrix delta = model.trunk[l];
            for (size_t p = 0; p < delta.values.size(); ++p) delta.values[p] -= lf.w_star.values[p];
            total += 0.5 * kron_quad_form(lf.g_factor, delta, lf.a_factor);
        }
        const Matrix& head = model.heads[static_cast<size_t>(anchor.head_index)].weight;
        Matrix delta(anchor.head_rows, head.cols);
        for (int r = 0; r < anchor.head_rows; ++r)
            for (int c = 0; c < head.cols; ++c)
                delta(r, c) = head(r, c) - anchor.head.w_star(r, c);
        total += 0.5 * kron_quad_form(anchor.head.g_factor, delta, anchor.head.a_factor);
    }

    return total;
}

void Strategy::regularize_gradient(const MlpModel& model, Gradients& grads, double lambda) const {
    switch (config_.kind) {
        case StrategyKind::FineTune:
        case StrategyKind::Rehearsal: return;
        case StrategyKind::Ogd: {
            Vector flat = flatten_trunk(grads.trunk);
            ogd_project(ogd_, flat);
            size_t off = 0;
            for (Matrix& m : grads.trunk) {
                std::copy(flat.begin() + static_cast<long>(off),
                          flat.begin() + static_cast<long>(off + m.size()), m.values.begin());
                off += m.size();
            }
            return;
        }
        case StrategyKind::Ewc: {
            for (const EwcAnchor& anchor : ewc_anchors_) {
                for (size_t l = 0; l < anchor.trunk_star.size(); ++l) {
                    const std::vector<double>& theta = model.trunk[l].values;
                    const std::vector<double>& star = anchor.trunk_star[l].values;
                    const std::vector<double>& fisher = anchor.trunk_fisher[l].values;
                    std::vector<double>& g = grads.trunk[l].values;
                    for (size_t p = 0; p < theta.size(); ++p)
                        g[p] += lambda * fisher[p] * (theta[p] - star[p]);
                }
                if (anchor.head_index != grads.head_index) continue;
                const Matrix& head = model.heads[static_cast<size_t>(anchor.head_index)].weight;
                for (int r = 0; r < anchor.head_rows; ++r) {
                    const double* theta = head.row_ptr(r);
                    const double* star = anchor.head_star.row_ptr(r);
                    const double* fisher = anchor.head_fisher.row_ptr(r);
                    double* g = grads.head.row_ptr(r);
                    for (int c = 0; c < head.cols; ++c)
                        g[c] += lambda * fisher[c] * (theta[c] - star[c]);
                }
            }
            return;
        }
        case StrategyKind::EwcKfac: {
            for (const KfacAnchor& anchor : kfac_anchors_) {
                for (size_t l = 0; l < anchor.trunk.size(); ++l) {
                    const KfacLayerFactors& lf = anchor.trunk[l];
                    Matrix delta = model.trunk[l];
                    for (size_t p = 0; p < delta.values.size(); ++p)
                        delta.values[p] -= lf.w_star.values[p];
                    const Matrix pg = matmul(lf.g_factor, matmul(delta, lf.a_factor));
                    std::vector<double>& g = grads.trunk[l].values;
                    for (size_t p = 0; p < g.size(); ++p) g[p] += lambda * pg.values[p];
                }
                if (anchor.head_index != grads.head_index) continue;
                const Matrix& head = model.heads[static_cast<size_t>(anchor.head_index)].weight;
                Matrix delta(anchor.head_rows, head.cols);
                for (int r = 0; r < anchor.head_rows; ++r)
                    for (int c = 0; c < head.cols; ++c)
                        delta(r, c) = head(r, c) - anchor.head.w_star(r, c);
                const Matrix pg = matmul(anchor.head.g_factor, matmul(delta, anchor.head.a_factor));
                for (int r = 0; r < anchor.head_rows; ++r) {
                    double* g = grads.head.row_ptr(r);
                    const double* p = pg.row_ptr(r);
                    for (int c = 0; c < head.cols; ++c) g[c] += lambda * p[c];
                }
            }
            return;
        }
    }
}

Batch Strategy::compose_batch(Batch current, Rng& rng) const {
    if (config_.kind != StrategyKind::Rehearsal || buffer_.empty()) return current;
    for (TrainExample& slot : current) {
        if (rng.uniform() < 0.5) {
            const StoredExample& drawn = buffer_.sample_uniform(rng);
            slot.x = drawn.x;
            slot.local_label = drawn.local_label;
            slot.head_index = drawn.head_index;
        }
    }
    return current;
}

}  // namespace contbench
