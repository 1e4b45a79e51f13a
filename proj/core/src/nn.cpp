#include "contbench/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "contbench/errors.hpp"
#include "contbench/rng.hpp"

namespace contbench {

namespace {

std::vector<int> trunk_dims(const MlpConfig& config) {
    std::vector<int> dims;
    dims.reserve(config.hidden_sizes.size() + 1);
    dims.push_back(config.input_dim);
    dims.insert(dims.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
    return dims;
}

Matrix random_rows(int rows, int fan_in, double scale, Rng& rng) {
    Matrix w(rows, fan_in + 1);  // bias column stays 0
    for (int r = 0; r < rows; ++r) {
        double* row = w.row_ptr(r);
        for (int c = 0; c < fan_in; ++c) row[c] = scale * rng.normal();
    }
    return w;
}

Matrix head_rows(int n_classes, int latent_dim, Rng& rng) {
    return random_rows(n_classes, latent_dim, std::sqrt(1.0 / latent_dim), rng);
}

void check_input(const MlpModel& model, const Vector& x) {
    if (static_cast<int>(x.size()) != model.config.input_dim)
        throw DimensionError("input length " + std::to_string(x.size()) + " != input_dim " +
                             std::to_string(model.config.input_dim));
}

void check_head(const MlpModel& model, int head_index) {
    if (head_index < 0 || head_index >= static_cast<int>(model.heads.size()))
        throw DimensionError("head index " + std::to_string(head_index) + " out of range");
}

// logits += W * [a; 1] for a weight with trailing bias column.
void affine_into(const Matrix& w, const Vector& a, Vector& out) {
    out.assign(static_cast<size_t>(w.rows), 0.0);
    for (int r = 0; r < w.rows; ++r) {
        const double* row = w.row_ptr(r);
        double acc = row[w.cols - 1];  // bias
        for (int c = 0; c + 1 < w.cols; ++c) acc += row[c] * a[static_cast<size_t>(c)];
        out[static_cast<size_t>(r)] = acc;
    }
}

}  // namespace

void MlpConfig::validate() const {
    if (input_dim <= 0) throw UsageError("input_dim must be positive");
    if (hidden_sizes.empty()) throw UsageError("at least one hidden layer required");
    for (int h : hidden_sizes)
        if (h <= 0) throw UsageError("hidden sizes must be positive");
}

size_t MlpModel::trunk_param_count() const {
    size_t n = 0;
    for (const Matrix& w : trunk) n += w.size();
    return n;
}

bool MlpModel::all_finite() const {
    for (const Matrix& w : trunk)
        if (!w.all_finite()) return false;
    for (const Head& h : heads)
        if (!h.weight.all_finite()) return false;
    return true;
}

MlpModel init(const MlpConfig& config, int n_initial_classes) {
    config.validate();
    if (n_initial_classes < 1) throw DimensionError("need at least one initial class");

    MlpModel model;
    model.config = config;
    Rng rng(config.init_seed);

    const std::vector<int> dims = trunk_dims(config);
    model.trunk.reserve(dims.size() - 1);
    for (size_t l = 0; l + 1 < dims.size(); ++l)
        model.trunk.push_back(random_rows(dims[l + 1], dims[l], std::sqrt(2.0 / dims[l]), rng));

    Head head;
    head.class_offset = 0;
    head.weight = head_rows(n_initial_classes, config.latent_dim(), rng);
    model.heads.push_back(std::move(head));
    return model;
}

void forward_into(const MlpModel& model, const Vector& x, int head_index, Vector& logits,
                  ForwardCache& cache) {
    check_input(model, x);
    check_head(model, head_index);

    const size_t n_layers = model.trunk.size();
    cache.inputs.resize(n_layers);
    cache.preacts.resize(n_layers);

    const Vector* a = &x;
    for (size_t l = 0; l < n_layers; ++l) {
        const Matrix& w = model.trunk[l];
        Vector& in = cache.inputs[l];
        in.assign(a->begin(), a->end());
        in.push_back(1.0);

        Vector& z = cache.preacts[l];
        z.assign(static_cast<size_t>(w.rows), 0.0);
        for (int r = 0; r < w.rows; ++r) {
            const double* row = w.row_ptr(r);
            double acc = 0.0;
            for (int c = 0; c < w.cols; ++c) acc += row[c] * in[static_cast<size_t>(c)];
            z[static_cast<size_t>(r)] = acc;
        }

        // After the last layer this is the latent; before that it feeds the
        // next input copy, so reusing the same buffer is safe.
        cache.latent.resize(z.size());
        for (size_t i = 0; i < z.size(); ++i) cache.latent[i] = std::max(0.0, z[i]);
        a = &cache.latent;
    }

    cache.head_input.assign(cache.latent.begin(), cache.latent.end());
    cache.head_input.push_back(1.0);

    const Matrix& hw = model.heads[static_cast<size_t>(head_index)].weight;
    logits.assign(static_cast<size_t>(hw.rows), 0.0);
    for (int r = 0; r < hw.rows; ++r) {
        const double* row = hw.row_ptr(r);
        double acc = 0.0;
        for (int c = 0; c < hw.cols; ++c) acc += row[c] * cache.head_input[static_cast<size_t>(c)];
        logits[static_cast<size_t>(r)] = acc;
    }
}

std::pair<Vector, ForwardCache> forward(const MlpModel& model, const Vector& x, int head_index) {
    Vector logits;
    ForwardCache cache;
    forward_into(model, x, head_index, logits, cache);
    return {std::move(logits), std::move(cache)};
}

Vector predict_logits(const MlpModel& model, const Vector& x, int head_index) {
    check_input(model, x);
    check_head(model, head_index);

    Vector a = x;
    Vector z;
    for (const Matrix& w : model.trunk) {
        z.assign(static_cast<size_t>(w.rows), 0.0);
        for (int r = 0; r < w.rows; ++r) {
            const double* row = w.row_ptr(r);
            double acc = row[w.cols - 1];
            for (int c = 0; c + 1 < w.cols; ++c) acc += row[c] * a[static_cast<size_t>(c)];
            z[static_cast<size_t>(r)] = acc;
        }
        a.resize(z.size());
        for (size_t i = 0; i < z.size(); ++i) a[i] = std::max(0.0, z[i]);
    }

    Vector logits;
    affine_into(model.heads[static_cast<size_t>(head_index)].weight, a, logits);
    return logits;
}

std::pair<double, Vector> loss_ce(const Vector& logits, int target_local) {
    if (target_local < 0 || target_local >= static_cast<int>(logits.size()))
        throw DimensionError("target out of range");

    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum_exp = 0.0;
    Vector probs(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        sum_exp += probs[i];
    }
    const double log_sum = std::log(sum_exp);
    const double loss = log_sum - (logits[static_cast<size_t>(target_local)] - max_logit);

    Vector dlogits(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) dlogits[i] = probs[i] / sum_exp;
    dlogits[static_cast<size_t>(target_local)] -= 1.0;
    return {loss, std::move(dlogits)};
}

Gradients zero_gradients_like(const MlpModel& model, int head_index) {
    check_head(model, head_index);
    Gradients g;
    g.head_index = head_index;
    g.trunk.reserve(model.trunk.size());
    for (const Matrix& w : model.trunk) g.trunk.emplace_back(w.rows, w.cols);
    const Matrix& hw = model.heads[static_cast<size_t>(head_index)].weight;
    g.head = Matrix(hw.rows, hw.cols);
    return g;
}

void scale_gradients(Gradients& grads, double factor) {
    for (Matrix& w : grads.trunk)
        for (double& v : w.values) v *= factor;
    for (double& v : grads.head.values) v *= factor;
}

void backward_accumulate(const MlpModel& model, const ForwardCache& cache, const Vector& dlogits,
                         int head_index, Gradients& acc, std::vector<Vector>* deltas_out) {
    check_head(model, head_index);
    const Matrix& hw = model.heads[static_cast<size_t>(head_index)].weight;
    if (static_cast<int>(dlogits.size()) != hw.rows)
        throw DimensionError("dlogits length does not match head rows");
    if (acc.head_index != head_index || !acc.head.same_shape(hw) ||
        acc.trunk.size() != model.trunk.size())
        throw DimensionError("gradient accumulator does not match model/head");

    // Head: dL/dW_head = dlogits * head_input^T.
    for (int r = 0; r < hw.rows; ++r) {
        const double d = dlogits[static_cast<size_t>(r)];
        if (d == 0.0) continue;
        double* grow = acc.head.row_ptr(r);
        for (int c = 0; c < hw.cols; ++c) grow[c] += d * cache.head_input[static_cast<size_t>(c)];
    }

    // Into the latent: dL/dlatent = W_head^T (no bias row) * dlogits.
    const int latent_dim = hw.cols - 1;
    Vector da(static_cast<size_t>(latent_dim), 0.0);
    for (int r = 0; r < hw.rows; ++r) {
        const double d = dlogits[static_cast<size_t>(r)];
        if (d == 0.0) continue;
        const double* row = hw.row_ptr(r);
        for (int c = 0; c < latent_dim; ++c) da[static_cast<size_t>(c)] += d * row[c];
    }

    const size_t n_layers = model.trunk.size();
    if (deltas_out) deltas_out->assign(n_layers, Vector());

    Vector delta;
    for (size_t l = n_layers; l-- > 0;) {
        const Matrix& w = model.trunk[l];
        const Vector& z = cache.preacts[l];
        const Vector& in = cache.inputs[l];

        // Through the ReLU: delta = da where z > 0, else 0.
        delta.resize(z.size());
        for (size_t i = 0; i < z.size(); ++i) delta[i] = z[i] > 0.0 ? da[i] : 0.0;
        if (deltas_out) (*deltas_out)[l] = delta;

        Matrix& gw = acc.trunk[l];
        for (int r = 0; r < w.rows; ++r) {
            const double d = delta[static_cast<size_t>(r)];
            if (d == 0.0) continue;
            double* grow = gw.row_ptr(r);
            for (int c = 0; c < w.cols; ++c) grow[c] += d * in[static_cast<size_t>(c)];
        }

        if (l > 0) {
            da.assign(static_cast<size_t>(w.cols - 1), 0.0);
            for (int r = 0; r < w.rows; ++r) {
                const double d = delta[static_cast<size_t>(r)];
                if (d == 0.0) continue;
                const double* row = w.row_ptr(r);
                for (int c = 0; c + 1 < w.cols; ++c) da[static_cast<size_t>(c)] += d * row[c];
            }
        }
    }
}

Gradients backward(const MlpModel& model, const ForwardCache& cache, const Vector& dlogits,
                   int head_index, std::vector<Vector>* deltas_out) {
    Gradients g = zero_gradients_like(model, head_index);
    backward_accumulate(model, cache, dlogits, head_index, g, deltas_out);
    return g;
}

void sgd_step(MlpModel& model, const Gradients& grads, double lr) {
    if (grads.trunk.size() != model.trunk.size())
        throw DimensionError("gradient/model trunk mismatch");
    check_head(model, grads.head_index);
    Matrix& hw = model.heads[static_cast<size_t>(grads.head_index)].weight;
    if (!grads.head.same_shape(hw)) throw DimensionError("gradient/model head mismatch");

    for (size_t l = 0; l < model.trunk.size(); ++l) {
        Matrix& w = model.trunk[l];
        if (!grads.trunk[l].same_shape(w)) throw DimensionError("gradient/model trunk mismatch");
        for (size_t i = 0; i < w.values.size(); ++i) w.values[i] -= lr * grads.trunk[l].values[i];
    }
    for (size_t i = 0; i < hw.values.size(); ++i) hw.values[i] -= lr * grads.head.values[i];
}

void expand_head(MlpModel& model, int n_new_classes, uint64_t seed) {
    if (!model.single_head()) throw UsageError("expand_head requires single-head mode");
    if (n_new_classes < 0) throw DimensionError("cannot expand by a negative class count");
    if (n_new_classes == 0) return;

    Rng rng(seed);
    Matrix& w = model.heads[0].weight;
    const int latent_dim = w.cols - 1;
    const Matrix extra = head_rows(n_new_classes, latent_dim, rng);

    Matrix grown(w.rows + n_new_classes, w.cols);
    std::memcpy(grown.values.data(), w.values.data(), w.values.size() * sizeof(double));
    std::memcpy(grown.row_ptr(w.rows), extra.values.data(), extra.values.size() * sizeof(double));
    w = std::move(grown);
}

int add_head(MlpModel& model, int n_classes, int class_offset, uint64_t seed) {
    if (n_classes < 1) throw DimensionError("head needs at least one class");
    if (class_offset < 0) throw DimensionError("class_offset must be non-negative");

    Rng rng(seed);
    Head head;
    head.class_offset = class_offset;
    head.weight = head_rows(n_classes, model.config.latent_dim(), rng);
    model.heads.push_back(std::move(head));
    return static_cast<int>(model.heads.size()) - 1;
}

Vector latent(const MlpModel& model, const Vector& x) {
    check_input(model, x);
    Vector a = x;
    Vector z;
    for (const Matrix& w : model.trunk) {
        z.assign(static_cast<size_t>(w.rows), 0.0);
        for (int r = 0; r < w.rows; ++r) {
            const double* row = w.row_ptr(r);
            double acc = row[w.cols - 1];
            for (int c = 0; c + 1 < w.cols; ++c) acc += row[c] * a[static_cast<size_t>(c)];
            z[static_cast<size_t>(r)] = acc;
        }
        a.resize(z.size());
        for (size_t i = 0; i < z.size(); ++i) a[i] = std::max(0.0, z[i]);
    }
    return a;
}

}  // namespace contbench
