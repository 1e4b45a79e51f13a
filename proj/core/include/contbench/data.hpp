#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "contbench/linalg.hpp"

namespace contbench {

/// Raw IDX array: big-endian magic (0x00000800 | type 0x08 | n_dims),
/// one big-endian uint32 per dimension, then the ubyte payload.
struct IdxArray {
    std::vector<uint32_t> dims;
    std::vector<uint8_t> payload;

    size_t item_count() const { return dims.empty() ? 0 : dims[0]; }
};

struct Dataset {
    std::vector<Vector> images;  // pixel values scaled to [0,1]
    std::vector<int> labels;

    size_t size() const { return images.size(); }
    bool empty() const { return images.empty(); }
};

enum class Setting { SingleHead, MultiHead };

std::string to_string(Setting setting);
Setting parse_setting(const std::string& name);

struct TaskSpec {
    int task_label = 0;
    std::string dataset_name;
    int n_classes = 0;
    // Offset already applied to this task's stored labels: 10*t in
    // single-head, 0 in multi-head (labels stay local).
    int class_offset = 0;
};

struct TaskData {
    TaskSpec spec;
    Dataset train;
    Dataset test;
};

struct Continuum {
    Setting setting = Setting::SingleHead;
    int input_dim = 0;
    std::vector<TaskData> tasks;

    int n_tasks() const { return static_cast<int>(tasks.size()); }
    int total_classes() const;
    /// Global label of task t's local class 0 (tasks have disjoint classes).
    int global_offset(int task_index) const;
};

// ---- IDX files ----------------------------------------------------------

IdxArray parse_idx(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> serialize_idx(const IdxArray& arr);

/// Reads a whole file; gzip-compressed content is inflated transparently.
std::vector<uint8_t> read_file_maybe_gzip(const std::string& path);

// ---- Datasets -----------------------------------------------------------

/// Loads an (images, labels) IDX pair. subsample > 0 keeps a class-balanced
/// random subset of that size (per-class quota, all of a class when it has
/// fewer). Deterministic in seed.
Dataset load_dataset(const std::string& images_path, const std::string& labels_path,
                     int subsample, uint64_t seed);

/// MNIST -> Fashion-MNIST -> KMNIST, 10 classes each. Expects
/// root/{mnist,fashion,kmnist}/{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz].
/// subsample_train/test > 0 keep class-balanced subsets per task.
Continuum build_fellowship(const std::string& root_dir, Setting setting, int subsample_train,
                           int subsample_test, uint64_t seed);

/// Per-task isotropic Gaussian blobs (sigma 0.15) centered on distinct unit-
/// circle points of a random 2-D subspace; disjoint class ids across tasks;
/// 80/20 train/test split.
Continuum synthetic_blobs(int n_tasks, int classes_per_task, int dim, int n_per_class,
                          uint64_t seed, Setting setting = Setting::SingleHead);

// ---- Batching -----------------------------------------------------------

/// Deterministic epoch shuffle of [0, n) cut into batch_size chunks; the
/// last batch may be short.
std::vector<std::vector<int>> iterate_batches(size_t n, int batch_size, uint64_t epoch_seed);

}  // namespace contbench
