#include "contbench/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "contbench/errors.hpp"
#include "contbench/rng.hpp"

namespace contbench {

namespace {

constexpr double kBlobSigma = 0.15;

uint32_t read_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void write_be32(uint32_t v, std::vector<uint8_t>& out) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

std::vector<uint8_t> gzip_inflate(const std::vector<uint8_t>& in, const std::string& path) {
    z_stream zs{};
    // windowBits 15+32: auto-detect zlib or gzip wrapping.
    if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("zlib init failed for " + path);

    std::vector<uint8_t> out;
    out.reserve(in.size() * 4);
    std::array<uint8_t, 1 << 16> buf;
    zs.next_in = const_cast<uint8_t*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());

    int rc = Z_OK;
    do {
        zs.next_out = buf.data();
        zs.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw DataFormatError("corrupt gzip stream in " + path);
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
    } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));

    inflateEnd(&zs);
    if (rc != Z_STREAM_END) throw DataFormatError("truncated gzip stream in " + path);
    return out;
}

}  // namespace

std::string to_string(Setting setting) {
    return setting == Setting::SingleHead ? "single-head" : "multi-head";
}

Setting parse_setting(const std::string& name) {
    if (name == "single-head" || name == "single") return Setting::SingleHead;
    if (name == "multi-head" || name == "multi") return Setting::MultiHead;
    throw UsageError("unknown setting '" + name + "' (expected single-head or multi-head)");
}

int Continuum::total_classes() const {
    int n = 0;
    for (const TaskData& t : tasks) n += t.spec.n_classes;
    return n;
}

int Continuum::global_offset(int task_index) const {
    if (task_index < 0 || task_index >= n_tasks()) throw UsageError("task index out of range");
    int off = 0;
    for (int t = 0; t < task_index; ++t) off += tasks[size_t(t)].spec.n_classes;
    return off;
}

IdxArray parse_idx(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 4) throw DataFormatError("IDX data shorter than its magic");
    if (bytes[0] != 0 || bytes[1] != 0)
        throw DataFormatError("bad IDX magic: first two bytes must be zero");
    if (bytes[2] != 0x08)
        throw DataFormatError("unsupported IDX element type 0x" + std::to_string(bytes[2]) +
                              " (only unsigned byte, 0x08)");
    const int n_dims = bytes[3];
    if (n_dims < 1) throw DataFormatError("IDX dimension count must be at least 1");

    const size_t header = 4 + 4 * static_cast<size_t>(n_dims);
    if (bytes.size() < header) throw DataFormatError("IDX header truncated");

    IdxArray arr;
    size_t total = 1;
    for (int d = 0; d < n_dims; ++d) {
        const uint32_t dim = read_be32(bytes.data() + 4 + 4 * static_cast<size_t>(d));
        arr.dims.push_back(dim);
        total *= dim;
    }
    const size_t have = bytes.size() - header;
    if (have < total) throw DataFormatError("IDX payload truncated: expected " +
                                            std::to_string(total) + " bytes, found " +
                                            std::to_string(have));
    if (have > total) throw DataFormatError("IDX payload has " + std::to_string(have - total) +
                                            " trailing bytes");
    arr.payload.assign(bytes.begin() + static_cast<long>(header), bytes.end());
    return arr;
}

std::vector<uint8_t> serialize_idx(const IdxArray& arr) {
    if (arr.dims.empty()) throw DataFormatError("cannot serialize an IDX array with no dims");
    size_t total = 1;
    for (uint32_t d : arr.dims) total *= d;
    if (total != arr.payload.size())
        throw DataFormatError("IDX payload size does not match dims product");

    std::vector<uint8_t> out;
    out.reserve(4 + 4 * arr.dims.size() + arr.payload.size());
    out.push_back(0);
    out.push_back(0);
    out.push_back(0x08);
    out.push_back(static_cast<uint8_t>(arr.dims.size()));
    for (uint32_t d : arr.dims) write_be32(d, out);
    out.insert(out.end(), arr.payload.begin(), arr.payload.end());
    return out;
}

std::vector<uint8_t> read_file_maybe_gzip(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path);
    std::vector<uint8_t> bytes;
    std::array<uint8_t, 1 << 16> buf;
    size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), f)) > 0)
        bytes.insert(bytes.end(), buf.data(), buf.data() + got);
    const bool failed = std::ferror(f) != 0;
    std::fclose(f);
    if (failed) throw IoError("read error on " + path);

    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gzip_inflate(bytes, path);
    return bytes;
}

namespace {

// Class-balanced subsample: per-class quota with the remainder spread over
// the lowest class ids; within a class the picks are a seeded random subset,
// kept in source order.
std::vector<int> balanced_indices(const std::vector<int>& labels, int subsample, uint64_t seed) {
    int max_label = 0;
    for (int y : labels) max_label = std::max(max_label, y);
    const int n_classes = max_label + 1;

    std::vector<std::vector<int>> by_class(static_cast<size_t>(n_classes));
    for (size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<size_t>(labels[i])].push_back(static_cast<int>(i));

    Rng rng(seed);
    std::vector<int> picked;
    picked.reserve(static_cast<size_t>(subsample));
    const int quota = subsample / n_classes;
    const int remainder = subsample % n_classes;
    for (int c = 0; c < n_classes; ++c) {
        std::vector<int>& pool = by_class[static_cast<size_t>(c)];
        const int want = quota + (c < remainder ? 1 : 0);
        rng.shuffle(pool);
        const int take = std::min<int>(want, static_cast<int>(pool.size()));
        std::sort(pool.begin(), pool.begin() + take);
        picked.insert(picked.end(), pool.begin(), pool.begin() + take);
    }
    return picked;
}

}  // namespace

Dataset load_dataset(const std::string& images_path, const std::string& labels_path, int subsample,
                     uint64_t seed) {
    const IdxArray images = parse_idx(read_file_maybe_gzip(images_path));
    const IdxArray labels = parse_idx(read_file_maybe_gzip(labels_path));

    if (images.dims.size() != 3)
        throw DataFormatError(images_path + ": expected a 3-D image array, got " +
                              std::to_string(images.dims.size()) + " dims");
    if (labels.dims.size() != 1)
        throw DataFormatError(labels_path + ": expected a 1-D label array, got " +
                              std::to_string(labels.dims.size()) + " dims");
    if (images.dims[0] != labels.dims[0])
        throw DataFormatError("item count mismatch: " + images_path + " has " +
                              std::to_string(images.dims[0]) + " images, " + labels_path +
                              " has " + std::to_string(labels.dims[0]) + " labels");

    const size_t n = images.dims[0];
    const size_t pixels = static_cast<size_t>(images.dims[1]) * images.dims[2];

    std::vector<int> all_labels(n);
    for (size_t i = 0; i < n; ++i) {
        const int y = labels.payload[i];
        if (y > 9)
            throw DataFormatError(labels_path + ": label " + std::to_string(y) +
                                  " outside the 10-class range");
        all_labels[i] = y;
    }

    std::vector<int> keep;
    if (subsample > 0 && static_cast<size_t>(subsample) < n) {
        keep = balanced_indices(all_labels, subsample, seed);
    } else {
        keep.resize(n);
        std::iota(keep.begin(), keep.end(), 0);
    }

    Dataset out;
    out.images.reserve(keep.size());
    out.labels.reserve(keep.size());
    for (int idx : keep) {
        const uint8_t* px = images.payload.data() + static_cast<size_t>(idx) * pixels;
        Vector img(pixels);
        for (size_t p = 0; p < pixels; ++p) img[p] = px[p] / 255.0;
        out.images.push_back(std::move(img));
        out.labels.push_back(all_labels[static_cast<size_t>(idx)]);
    }
    return out;
}

Continuum build_fellowship(const std::string& root_dir, Setting setting, int subsample_train,
                           int subsample_test, uint64_t seed) {
    static const std::array<const char*, 3> kNames = {"mnist", "fashion", "kmnist"};

    auto find_file = [&](const std::string& dataset, const std::string& stem) {
        const std::string base = root_dir + "/" + dataset + "/" + stem;
        for (const char* ext : {".gz", ""}) {
            const std::string path = base + ext;
            if (std::FILE* f = std::fopen(path.c_str(), "rb")) {
                std::fclose(f);
                return path;
            }
        }
        throw IoError("missing dataset file " + base + "[.gz] — run the fetch command first");
    };

    Continuum continuum;
    continuum.setting = setting;
    continuum.input_dim = 784;
    for (int t = 0; t < 3; ++t) {
        const std::string name = kNames[static_cast<size_t>(t)];
        TaskData task;
        task.spec.task_label = t;
        task.spec.dataset_name = name;
        task.spec.n_classes = 10;
        task.spec.class_offset = setting == Setting::SingleHead ? 10 * t : 0;

        task.train = load_dataset(find_file(name, "train-images-idx3-ubyte"),
                                  find_file(name, "train-labels-idx1-ubyte"), subsample_train,
                                  derive_seed(seed, "subsample-train", static_cast<uint64_t>(t)));
        task.test = load_dataset(find_file(name, "t10k-images-idx3-ubyte"),
                                 find_file(name, "t10k-labels-idx1-ubyte"), subsample_test,
                                 derive_seed(seed, "subsample-test", static_cast<uint64_t>(t)));

        if (task.spec.class_offset != 0) {
            for (int& y : task.train.labels) y += task.spec.class_offset;
            for (int& y : task.test.labels) y += task.spec.class_offset;
        }
        continuum.tasks.push_back(std::move(task));
    }
    return continuum;
}

Continuum synthetic_blobs(int n_tasks, int classes_per_task, int dim, int n_per_class,
                          uint64_t seed, Setting setting) {
    if (n_tasks < 1 || classes_per_task < 1 || dim < 2 || n_per_class < 1)
        throw UsageError("synthetic_blobs: counts must be >= 1 and dim >= 2");

    Rng rng(seed);

    // Random orthonormal 2-D subspace carrying the circle of centers.
    Vector u(static_cast<size_t>(dim)), w(static_cast<size_t>(dim));
    for (double& v : u) v = rng.normal();
    for (double& v : w) v = rng.normal();
    const double un = norm(u);
    for (double& v : u) v /= un;
    auto ortho = gram_schmidt_extend({u}, w);
    while (!ortho) {
        for (double& v : w) v = rng.normal();
        ortho = gram_schmidt_extend({u}, w);
    }
    const Vector v2 = *ortho;

    const int total_classes = n_tasks * classes_per_task;
    const double phase = rng.uniform() * 2.0 * M_PI;

    const int n_train = n_per_class * 4 / 5;

    Continuum continuum;
    continuum.setting = setting;
    continuum.input_dim = dim;
    for (int t = 0; t < n_tasks; ++t) {
        TaskData task;
        task.spec.task_label = t;
        task.spec.dataset_name = "blobs";
        task.spec.n_classes = classes_per_task;
        task.spec.class_offset = setting == Setting::SingleHead ? t * classes_per_task : 0;

        for (int c = 0; c < classes_per_task; ++c) {
            const int k = t * classes_per_task + c;
            const double angle = phase + 2.0 * M_PI * k / total_classes;
            const double cx = std::cos(angle);
            const double cy = std::sin(angle);
            const int label = task.spec.class_offset + c;

            for (int i = 0; i < n_per_class; ++i) {
                Vector x(static_cast<size_t>(dim));
                for (int d = 0; d < dim; ++d) {
                    x[static_cast<size_t>(d)] = cx * u[static_cast<size_t>(d)] +
                                                cy * v2[static_cast<size_t>(d)] +
                                                kBlobSigma * rng.normal();
                }
                Dataset& split = i < n_train ? task.train : task.test;
                split.images.push_back(std::move(x));
                split.labels.push_back(label);
            }
        }
        continuum.tasks.push_back(std::move(task));
    }
    return continuum;
}

std::vector<std::vector<int>> iterate_batches(size_t n, int batch_size, uint64_t epoch_seed) {
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(epoch_seed);
    rng.shuffle(order);

    std::vector<std::vector<int>> batches;
    for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(n, start + static_cast<size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<long>(start),
                             order.begin() + static_cast<long>(end));
    }
    return batches;
}

}  // namespace contbench
