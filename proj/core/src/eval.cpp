#include "contbench/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "contbench/errors.hpp"
#include "contbench/rng.hpp"

namespace contbench {

namespace {

int argmax(const Vector& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

int predict_single_head(const MlpModel& model, const Vector& x) {
    if (!model.single_head())
        throw UsageError("single-head prediction on a multi-head model");
    return argmax(predict_logits(model, x, 0));
}

int predict_multi_head(const MlpModel& model, const Vector& x, int task_label) {
    if (task_label < 0 || task_label >= static_cast<int>(model.heads.size()))
        throw UsageError("no head for task " + std::to_string(task_label));
    return argmax(predict_logits(model, x, task_label));
}

EvalResult evaluate(const MlpModel& model, const Continuum& continuum, Setting setting) {
    if (setting == Setting::SingleHead && !model.single_head())
        throw UsageError("single-head evaluation needs a single-head model");
    if (setting != continuum.setting)
        throw UsageError("evaluation setting does not match the continuum's");

    EvalResult result;
    long correct_total = 0;
    long count_total = 0;
    for (const TaskData& task : continuum.tasks) {
        const int t = task.spec.task_label;
        long correct = 0;
        const long count = static_cast<long>(task.test.size());
        if (setting == Setting::SingleHead) {
            for (size_t i = 0; i < task.test.size(); ++i) {
                if (predict_single_head(model, task.test.images[i]) == task.test.labels[i])
                    ++correct;
            }
        } else if (t < static_cast<int>(model.heads.size())) {
            for (size_t i = 0; i < task.test.size(); ++i) {
                if (predict_multi_head(model, task.test.images[i], t) == task.test.labels[i])
                    ++correct;
            }
        }  // no head yet: every prediction counts as wrong
        result.acc_per_task.push_back(count > 0 ? double(correct) / double(count) : 0.0);
        correct_total += correct;
        count_total += count;
    }
    result.acc_global = count_total > 0 ? double(correct_total) / double(count_total) : 0.0;
    return result;
}

LatentSample sample_latents(const MlpModel& model, const Continuum& continuum, int n,
                            uint64_t seed) {
    std::vector<std::pair<int, int>> pool;  // (task index, sample index)
    for (int t = 0; t < continuum.n_tasks(); ++t)
        for (size_t i = 0; i < continuum.tasks[size_t(t)].test.size(); ++i)
            pool.emplace_back(t, static_cast<int>(i));

    if (n < 1 || static_cast<size_t>(n) > pool.size())
        throw UsageError("latent sample size " + std::to_string(n) + " exceeds test pool of " +
                         std::to_string(pool.size()));

    Rng rng(seed);
    rng.shuffle(pool);

    LatentSample out;
    out.latents.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const auto [t, i] = pool[static_cast<size_t>(k)];
        const TaskData& task = continuum.tasks[static_cast<size_t>(t)];
        out.latents.push_back(latent(model, task.test.images[static_cast<size_t>(i)]));
        out.task_labels.push_back(task.spec.task_label);
        const int raw = task.test.labels[static_cast<size_t>(i)];
        out.class_labels.push_back(task.spec.task_label * task.spec.n_classes +
                                   (raw - task.spec.class_offset));
    }
    return out;
}

// ---- t-SNE ---------------------------------------------------------------

namespace {

Matrix squared_distances(const std::vector<Vector>& points) {
    const int n = static_cast<int>(points.size());
    Matrix d2(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double s = 0.0;
            const Vector& a = points[static_cast<size_t>(i)];
            const Vector& b = points[static_cast<size_t>(j)];
            for (size_t k = 0; k < a.size(); ++k) {
                const double diff = a[k] - b[k];
                s += diff * diff;
            }
            s = std::max(s, 1e-12);  // duplicate points: distance floor
            d2(i, j) = s;
            d2(j, i) = s;
        }
    }
    return d2;
}

// KL(P || Q) with the usual 1e-12 clamps.
double kl_divergence(const Matrix& p, const Matrix& q) {
    double kl = 0.0;
    for (int i = 0; i < p.rows; ++i)
        for (int j = 0; j < p.cols; ++j) {
            if (i == j) continue;
            const double pij = std::max(p(i, j), 1e-12);
            const double qij = std::max(q(i, j), 1e-12);
            kl += pij * std::log(pij / qij);
        }
    return kl;
}

// Student-t joint distribution of the embedding, plus the unnormalized
// weights W (needed by the gradient).
void low_dim_affinities(const Matrix& y, Matrix& w, Matrix& q) {
    const int n = y.rows;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        w(i, i) = 0.0;
        for (int j = i + 1; j < n; ++j) {
            const double dx = y(i, 0) - y(j, 0);
            const double dy = y(i, 1) - y(j, 1);
            const double wij = 1.0 / (1.0 + dx * dx + dy * dy);
            w(i, j) = wij;
            w(j, i) = wij;
            sum += 2.0 * wij;
        }
    }
    const double inv = 1.0 / std::max(sum, 1e-300);
    for (size_t k = 0; k < w.values.size(); ++k) q.values[k] = w.values[k] * inv;
}

}  // namespace

Matrix tsne_conditional_probabilities(const std::vector<Vector>& points, double perplexity) {
    const int n = static_cast<int>(points.size());
    if (n < static_cast<int>(3 * perplexity))
        throw UsageError("t-SNE needs at least 3*perplexity points");
    for (const Vector& p : points)
        for (double v : p)
            if (!std::isfinite(v)) throw NumericError("non-finite t-SNE input");

    const Matrix d2 = squared_distances(points);
    const double target_entropy = std::log(perplexity);

    Matrix cond(n, n);  // p_{j|i}
    Vector row(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double beta = 1.0;
        double beta_min = 0.0;
        double beta_max = std::numeric_limits<double>::infinity();
        double sum_p = 0.0;

        for (int step = 0; step < 50; ++step) {
            sum_p = 0.0;
            double sum_d2p = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) {
                    row[static_cast<size_t>(j)] = 0.0;
                    continue;
                }
                const double pj = std::exp(-beta * d2(i, j));
                row[static_cast<size_t>(j)] = pj;
                sum_p += pj;
                sum_d2p += d2(i, j) * pj;
            }
            const double entropy = sum_p > 0.0
                                       ? std::log(sum_p) + beta * sum_d2p / sum_p
                                       : -std::numeric_limits<double>::infinity();
            const double diff = entropy - target_entropy;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0.0) {  // entropy too high -> sharpen
                beta_min = beta;
                beta = std::isinf(beta_max) ? beta * 2.0 : 0.5 * (beta + beta_max);
            } else {
                beta_max = beta;
                beta = 0.5 * (beta + beta_min);
            }
        }

        const double inv = 1.0 / std::max(sum_p, 1e-300);
        for (int j = 0; j < n; ++j) cond(i, j) = row[static_cast<size_t>(j)] * inv;
    }
    return cond;
}

Matrix tsne_joint_probabilities(const std::vector<Vector>& points, double perplexity) {
    const Matrix cond = tsne_conditional_probabilities(points, perplexity);
    const int n = cond.rows;
    Matrix p(n, n);
    const double inv2n = 1.0 / (2.0 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) p(i, j) = (cond(i, j) + cond(j, i)) * inv2n;
    return p;
}

TsneResult tsne(const std::vector<Vector>& points, double perplexity, int iters, uint64_t seed) {
    const int n = static_cast<int>(points.size());
    const Matrix p = tsne_joint_probabilities(points, perplexity);

    Rng rng(seed);
    Matrix y(n, 2);
    for (double& v : y.values) v = 1e-4 * rng.normal();

    Matrix w(n, n), q(n, n);
    low_dim_affinities(y, w, q);

    TsneResult result;
    result.kl_initial = kl_divergence(p, q);

    const double step_size = 200.0;
    Matrix vel(n, 2);
    Matrix grad(n, 2);
    for (int iter = 0; iter < iters; ++iter) {
        const double exaggeration = iter < 100 ? 4.0 : 1.0;
        const double momentum = iter < 250 ? 0.5 : 0.8;

        low_dim_affinities(y, w, q);
        std::fill(grad.values.begin(), grad.values.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double coeff = 4.0 * (exaggeration * p(i, j) - q(i, j)) * w(i, j);
                const double gx = coeff * (y(i, 0) - y(j, 0));
                const double gy = coeff * (y(i, 1) - y(j, 1));
                grad(i, 0) += gx;
                grad(i, 1) += gy;
                grad(j, 0) -= gx;
                grad(j, 1) -= gy;
            }
        }

        double mean_x = 0.0, mean_y = 0.0;
        for (int i = 0; i < n; ++i) {
            vel(i, 0) = momentum * vel(i, 0) - step_size * grad(i, 0);
            vel(i, 1) = momentum * vel(i, 1) - step_size * grad(i, 1);
            y(i, 0) += vel(i, 0);
            y(i, 1) += vel(i, 1);
            mean_x += y(i, 0);
            mean_y += y(i, 1);
        }
        mean_x /= n;
        mean_y /= n;
        for (int i = 0; i < n; ++i) {
            y(i, 0) -= mean_x;
            y(i, 1) -= mean_y;
        }
    }

    if (!y.all_finite()) throw NumericError("t-SNE diverged to non-finite coordinates");
    low_dim_affinities(y, w, q);
    result.kl_final = kl_divergence(p, q);
    result.coords = std::move(y);
    return result;
}

// ---- CSV -----------------------------------------------------------------

namespace {

std::string format_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct FileCloser {
    std::FILE* f;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

std::FILE* open_for_write(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write " + path);
    return f;
}

}  // namespace

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    const size_t n_tasks = rows.empty() ? 3 : rows.front().acc_per_task.size();
    std::FILE* f = open_for_write(path);
    FileCloser closer{f};

    std::string header = "step,tasks_trained,strategy,setting,seed,acc_global";
    for (size_t t = 0; t < n_tasks; ++t) header += ",acc_task" + std::to_string(t);
    header += ",penalty\n";
    std::fputs(header.c_str(), f);

    for (const MetricsRow& row : rows) {
        std::string line = std::to_string(row.step) + "," + std::to_string(row.tasks_trained) +
                           "," + row.strategy + "," + row.setting + "," +
                           std::to_string(row.seed) + "," + format_g6(row.acc_global);
        for (double acc : row.acc_per_task) line += "," + format_g6(acc);
        line += "," + format_g6(row.penalty) + "\n";
        std::fputs(line.c_str(), f);
    }
    if (std::ferror(f)) throw IoError("write failed on " + path);
}

void write_embedding_csv(const EmbeddingDump& dump, const std::string& path) {
    std::FILE* f = open_for_write(path);
    FileCloser closer{f};
    std::fputs("x,y,task_label,class_label\n", f);
    for (const EmbeddingPoint& pt : dump) {
        const std::string line = format_g6(pt.x) + "," + format_g6(pt.y) + "," +
                                 std::to_string(pt.task_label) + "," +
                                 std::to_string(pt.class_label) + "\n";
        std::fputs(line.c_str(), f);
    }
    if (std::ferror(f)) throw IoError("write failed on " + path);
}

}  // namespace contbench
