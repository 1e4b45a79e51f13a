#include "contbench/checkpoint.hpp"

#include <cstdio>
#include <cstring>

#include "contbench/errors.hpp"

namespace contbench {

namespace {

constexpr uint64_t kMagic = 0x31544b434243ull;  // "CBCKT1"
constexpr uint32_t kVersion = 1;

class Writer {
  public:
    explicit Writer(const std::string& path) : path_(path), f_(std::fopen(path.c_str(), "wb")) {
        if (!f_) throw IoError("cannot write " + path);
    }
    ~Writer() {
        if (f_) std::fclose(f_);
    }
    void close() {
        if (std::fclose(f_) != 0) {
            f_ = nullptr;
            throw IoError("write failed on " + path_);
        }
        f_ = nullptr;
    }

    void raw(const void* p, size_t n) {
        if (std::fwrite(p, 1, n, f_) != n) throw IoError("write failed on " + path_);
    }
    void u32(uint32_t v) { raw(&v, sizeof v); }
    void u64(uint64_t v) { raw(&v, sizeof v); }
    void i32(int32_t v) { raw(&v, sizeof v); }
    void i64(int64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void matrix(const Matrix& m) {
        i32(m.rows);
        i32(m.cols);
        raw(m.values.data(), m.values.size() * sizeof(double));
    }
    void vec(const Vector& v) {
        u64(v.size());
        raw(v.data(), v.size() * sizeof(double));
    }

  private:
    std::string path_;
    std::FILE* f_;
};

class Reader {
  public:
    explicit Reader(const std::string& path) : path_(path), f_(std::fopen(path.c_str(), "rb")) {
        if (!f_) throw IoError("cannot open " + path);
    }
    ~Reader() {
        if (f_) std::fclose(f_);
    }

    void raw(void* p, size_t n) {
        if (std::fread(p, 1, n, f_) != n)
            throw DataFormatError("truncated checkpoint " + path_);
    }
    uint32_t u32() {
        uint32_t v;
        raw(&v, sizeof v);
        return v;
    }
    uint64_t u64() {
        uint64_t v;
        raw(&v, sizeof v);
        return v;
    }
    int32_t i32() {
        int32_t v;
        raw(&v, sizeof v);
        return v;
    }
    int64_t i64() {
        int64_t v;
        raw(&v, sizeof v);
        return v;
    }
    double f64() {
        double v;
        raw(&v, sizeof v);
        return v;
    }
    Matrix matrix() {
        Matrix m;
        m.rows = i32();
        m.cols = i32();
        if (m.rows < 0 || m.cols < 0) throw DataFormatError("bad matrix shape in " + path_);
        m.values.resize(static_cast<size_t>(m.rows) * static_cast<size_t>(m.cols));
        raw(m.values.data(), m.values.size() * sizeof(double));
        return m;
    }
    Vector vec() {
        Vector v(u64());
        raw(v.data(), v.size() * sizeof(double));
        return v;
    }
    bool at_eof() {
        const int c = std::fgetc(f_);
        if (c == EOF) return true;
        std::ungetc(c, f_);
        return false;
    }

  private:
    std::string path_;
    std::FILE* f_;
};

}  // namespace

void save_checkpoint(const MlpModel& model, const Strategy& strategy, const std::string& path) {
    Writer w(path);
    w.u64(kMagic);
    w.u32(kVersion);

    // Model.
    w.i32(model.config.input_dim);
    w.u32(static_cast<uint32_t>(model.config.hidden_sizes.size()));
    for (int h : model.config.hidden_sizes) w.i32(h);
    w.u64(model.config.init_seed);
    w.u32(static_cast<uint32_t>(model.trunk.size()));
    for (const Matrix& m : model.trunk) w.matrix(m);
    w.u32(static_cast<uint32_t>(model.heads.size()));
    for (const Head& h : model.heads) {
        w.i32(h.class_offset);
        w.matrix(h.weight);
    }

    // Strategy.
    const StrategyConfig& sc = strategy.config();
    w.i32(static_cast<int32_t>(sc.kind));
    w.f64(sc.lambda);
    w.i32(sc.ogd_memory_per_task);
    w.i32(sc.ogd_basis_cap);
    w.i32(sc.buffer_per_class);
    w.u64(strategy.seed());

    w.u32(static_cast<uint32_t>(strategy.ewc_anchors().size()));
    for (const EwcAnchor& a : strategy.ewc_anchors()) {
        w.i32(a.head_index);
        w.i32(a.head_rows);
        w.u32(static_cast<uint32_t>(a.trunk_star.size()));
        for (size_t l = 0; l < a.trunk_star.size(); ++l) {
            w.matrix(a.trunk_star[l]);
            w.matrix(a.trunk_fisher[l]);
        }
        w.matrix(a.head_star);
        w.matrix(a.head_fisher);
    }

    w.u32(static_cast<uint32_t>(strategy.kfac_anchors().size()));
    for (const KfacAnchor& a : strategy.kfac_anchors()) {
        w.i32(a.head_index);
        w.i32(a.head_rows);
        w.u32(static_cast<uint32_t>(a.trunk.size()));
        for (const KfacLayerFactors& lf : a.trunk) {
            w.matrix(lf.w_star);
            w.matrix(lf.a_factor);
            w.matrix(lf.g_factor);
        }
        w.matrix(a.head.w_star);
        w.matrix(a.head.a_factor);
        w.matrix(a.head.g_factor);
    }

    w.u32(static_cast<uint32_t>(strategy.ogd_state().basis.size()));
    for (const Vector& v : strategy.ogd_state().basis) w.vec(v);

    const auto& slots = strategy.buffer().slots();
    w.u32(static_cast<uint32_t>(slots.size()));
    for (const auto& [cls, examples] : slots) {
        w.i32(cls);
        w.i64(strategy.buffer().seen_counts().at(cls));
        w.u32(static_cast<uint32_t>(examples.size()));
        for (const StoredExample& ex : examples) {
            w.vec(ex.x);
            w.i32(ex.global_label);
            w.i32(ex.local_label);
            w.i32(ex.head_index);
        }
    }
    w.close();
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    if (r.u64() != kMagic) throw DataFormatError(path + " is not a checkpoint file");
    if (r.u32() != kVersion) throw DataFormatError(path + ": unsupported checkpoint version");

    MlpModel model;
    model.config.input_dim = r.i32();
    model.config.hidden_sizes.clear();  // drop the default-constructed sizes
    const uint32_t n_hidden = r.u32();
    for (uint32_t i = 0; i < n_hidden; ++i) model.config.hidden_sizes.push_back(r.i32());
    model.config.init_seed = r.u64();
    const uint32_t n_trunk = r.u32();
    for (uint32_t i = 0; i < n_trunk; ++i) model.trunk.push_back(r.matrix());
    const uint32_t n_heads = r.u32();
    for (uint32_t i = 0; i < n_heads; ++i) {
        Head h;
        h.class_offset = r.i32();
        h.weight = r.matrix();
        model.heads.push_back(std::move(h));
    }

    StrategyConfig sc;
    sc.kind = static_cast<StrategyKind>(r.i32());
    sc.lambda = r.f64();
    sc.ogd_memory_per_task = r.i32();
    sc.ogd_basis_cap = r.i32();
    sc.buffer_per_class = r.i32();
    const uint64_t seed = r.u64();

    LoadedCheckpoint out{std::move(model), Strategy(sc, seed)};

    const uint32_t n_ewc = r.u32();
    for (uint32_t i = 0; i < n_ewc; ++i) {
        EwcAnchor a;
        a.head_index = r.i32();
        a.head_rows = r.i32();
        const uint32_t layers = r.u32();
        for (uint32_t l = 0; l < layers; ++l) {
            a.trunk_star.push_back(r.matrix());
            a.trunk_fisher.push_back(r.matrix());
        }
        a.head_star = r.matrix();
        a.head_fisher = r.matrix();
        out.strategy.ewc_anchors_mutable().push_back(std::move(a));
    }

    const uint32_t n_kfac = r.u32();
    for (uint32_t i = 0; i < n_kfac; ++i) {
        KfacAnchor a;
        a.head_index = r.i32();
        a.head_rows = r.i32();
        const uint32_t layers = r.u32();
        for (uint32_t l = 0; l < layers; ++l) {
            KfacLayerFactors lf;
            lf.w_star = r.matrix();
            lf.a_factor = r.matrix();
            lf.g_factor = r.matrix();
            a.trunk.push_back(std::move(lf));
        }
        a.head.w_star = r.matrix();
        a.head.a_factor = r.matrix();
        a.head.g_factor = r.matrix();
        out.strategy.kfac_anchors_mutable().push_back(std::move(a));
    }

    const uint32_t n_basis = r.u32();
    for (uint32_t i = 0; i < n_basis; ++i) out.strategy.ogd_state_mutable().basis.push_back(r.vec());

    const uint32_t n_classes = r.u32();
    for (uint32_t i = 0; i < n_classes; ++i) {
        const int cls = r.i32();
        const long seen = static_cast<long>(r.i64());
        const uint32_t n_examples = r.u32();
        std::vector<StoredExample> slot;
        for (uint32_t k = 0; k < n_examples; ++k) {
            StoredExample ex;
            ex.x = r.vec();
            ex.global_label = r.i32();
            ex.local_label = r.i32();
            ex.head_index = r.i32();
            slot.push_back(std::move(ex));
        }
        out.strategy.buffer_mutable().slots_mutable()[cls] = std::move(slot);
        out.strategy.buffer_mutable().seen_counts_mutable()[cls] = seen;
    }

    if (!r.at_eof()) throw DataFormatError(path + " has trailing bytes");
    return out;
}

}  // namespace contbench
