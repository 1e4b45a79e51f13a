#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "contbench/linalg.hpp"

namespace contbench {

struct LinearSeparator {
    Vector weight;
    double bias = 0.0;

    double margin(const Vector& x) const { return dot(weight, x) + bias; }
};

/// Inter-task inequality failure: old point i's own-column score (lhs) does
/// not beat its score under new column j (rhs), i.e. lhs <= rhs.
struct Violation {
    int point = 0;
    int column = 0;  // index into the column list the check ran against
    double lhs = 0.0;
    double rhs = 0.0;
};

struct LabeledPoint {
    Vector x;
    int label = 0;  // index into old_columns
};

/// For every old point and every new column, reports (i, j) whenever
/// <x_i, A_{y_i}> <= <x_i, A_j> — the failure mode the frozen old columns
/// cannot guard against. Column indices refer to new_columns.
std::vector<Violation> check_intertask_inequality(const std::vector<LabeledPoint>& old_points,
                                                  const std::vector<Vector>& new_columns,
                                                  const std::vector<Vector>& old_columns);

/// The hard-coded two-task counterexample: X0..X3 with frozen columns
/// A_0, A_1 and task-1 columns A_2, A_3.
struct MinimalExampleReport {
    Matrix products;             // products(i, j) = <X_i, A_j>, 4x4
    std::array<int, 4> predicted{};  // argmax over all four columns
    std::vector<Violation> violations;  // column field holds the global id (2 or 3)
};

MinimalExampleReport minimal_example();
std::string describe(const MinimalExampleReport& report);

struct DemoPoint {
    double x1 = 0.0;
    double x2 = 0.0;
    int class_label = 0;  // global class id
    int task_label = 0;
};

/// One run of the two-task linear demo on a four-blob layout.
struct SeparatorDemoVariant {
    std::string name;
    std::array<double, 2> intra_task_acc{};
    double multi_head_acc = 0.0;   // task label gates the separator
    double single_head_acc = 0.0;  // 4-way argmax over both separators' signed margins
    std::array<LinearSeparator, 2> separators{};
    std::vector<DemoPoint> points;  // the training cloud both separators saw
};

struct SeparatorDemoReport {
    SeparatorDemoVariant spaced;   // blobs spread on the unit circle
    SeparatorDemoVariant overlap;  // task-0 classes sit astride task-1's separator
};

/// Full-batch logistic regression (step 0.1, 500 iterations) on one task's
/// points; positive_class is the global class mapped to the positive margin.
LinearSeparator train_logistic_separator(const std::vector<DemoPoint>& points, int task,
                                         int positive_class);

/// Trains one frozen logistic separator per task (via
/// train_logistic_separator) on both blob layouts and scores the gated vs
/// the 4-way reading.
SeparatorDemoReport separator_demo(uint64_t seed);
std::string describe(const SeparatorDemoReport& report);

/// Demo dump: points as x,y,class,task rows and hyperplanes as w1,w2,b,task.
void write_demo_points_csv(const SeparatorDemoVariant& variant, const std::string& path);
void write_demo_planes_csv(const SeparatorDemoVariant& variant, const std::string& path);

}  // namespace contbench
