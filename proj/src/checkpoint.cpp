#include "brsm/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace brsm {

namespace {

constexpr char kMagic[8] = {'B', 'R', 'S', 'M', 'C', 'K', 'P', 'T'};

class Writer {
  public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("checkpoint: cannot write " + path);
    }

    void bytes(const void* data, std::size_t size) {
        out_.write(static_cast<const char*>(data), static_cast<long>(size));
        if (!out_) throw IoError("checkpoint: write failed");
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    void vec(const Vector& v) {
        u64(v.size());
        bytes(v.data(), v.size() * sizeof(double));
    }
    void mat(const Matrix& m) {
        u32(static_cast<std::uint32_t>(m.rows()));
        u32(static_cast<std::uint32_t>(m.cols()));
        bytes(m.data().data(), m.size() * sizeof(double));
    }

  private:
    std::ofstream out_;
};

class Reader {
  public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw IoError("checkpoint: cannot open " + path);
    }

    void bytes(void* data, std::size_t size) {
        in_.read(static_cast<char*>(data), static_cast<long>(size));
        if (static_cast<std::size_t>(in_.gcount()) != size)
            throw ParseError("checkpoint: truncated file");
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, 8);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, 8);
        return v;
    }
    std::string str() {
        const std::uint64_t size = u64();
        if (size > (1ULL << 32)) throw ParseError("checkpoint: absurd string length");
        std::string s(size, '\0');
        bytes(s.data(), size);
        return s;
    }
    Vector vec() {
        const std::uint64_t size = u64();
        if (size > (1ULL << 32)) throw ParseError("checkpoint: absurd vector length");
        Vector v(size);
        bytes(v.data(), size * sizeof(double));
        return v;
    }
    Matrix mat() {
        const int rows = static_cast<int>(u32());
        const int cols = static_cast<int>(u32());
        if (rows <= 0 || cols <= 0 || static_cast<long>(rows) * cols > (1L << 31))
            throw ParseError("checkpoint: absurd matrix shape");
        Matrix m(rows, cols);
        bytes(m.data().data(), m.size() * sizeof(double));
        return m;
    }

  private:
    std::ifstream in_;
};

void write_adam(Writer& w, const AdamSnapshot& adam) {
    w.u64(static_cast<std::uint64_t>(adam.steps));
    w.u32(static_cast<std::uint32_t>(adam.slots.size()));
    for (const AdamSlot& slot : adam.slots) {
        w.vec(slot.m);
        w.vec(slot.v);
    }
}

AdamSnapshot read_adam(Reader& r) {
    AdamSnapshot adam;
    adam.steps = static_cast<long>(r.u64());
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        AdamSlot slot;
        slot.m = r.vec();
        slot.v = r.vec();
        adam.slots.push_back(std::move(slot));
    }
    return adam;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
    Writer w(path);
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(kCheckpointVersion);
    w.u8(sizeof(double));  // element width
    w.u8(data.task == TaskKind::Ssmnist ? 0 : 1);
    w.str(data.config_text);

    w.mat(data.weights.w_ff);
    w.mat(data.weights.w_rec);
    w.mat(data.weights.w_dec);
    w.u8(data.weights.decay_logits.empty() ? 0 : 1);
    if (!data.weights.decay_logits.empty()) w.vec(data.weights.decay_logits);

    w.vec(data.duty);
    w.f64(data.beta);
    w.vec(data.inhibition);
    write_adam(w, data.rsm_adam);

    w.u32(static_cast<std::uint32_t>(data.classifier.input_dim));
    w.u32(static_cast<std::uint32_t>(data.classifier.hidden_dim));
    w.u32(static_cast<std::uint32_t>(data.classifier.output_dim));
    w.mat(data.classifier.w1);
    w.vec(data.classifier.b1);
    w.mat(data.classifier.w2);
    w.vec(data.classifier.b2);
    write_adam(w, data.classifier.adam);

    w.u32(static_cast<std::uint32_t>(data.rng_states.size()));
    for (const std::string& s : data.rng_states) w.str(s);

    w.u32(static_cast<std::uint32_t>(data.vocab_words.size()));
    for (const std::string& s : data.vocab_words) w.str(s);
    w.u32(static_cast<std::uint32_t>(data.embedding_dim));
    w.u32(static_cast<std::uint32_t>(data.embedding_vectors.size()));
    for (const Vector& v : data.embedding_vectors) w.vec(v);
}

CheckpointData load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ParseError("checkpoint: bad magic (not a checkpoint file)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    const std::uint8_t width = r.u8();
    if (width != sizeof(double))
        throw ParseError("checkpoint: element width " + std::to_string(width) +
                         " does not match this build");
    CheckpointData data;
    data.task = r.u8() == 0 ? TaskKind::Ssmnist : TaskKind::Lm;
    data.config_text = r.str();

    data.weights.w_ff = r.mat();
    data.weights.w_rec = r.mat();
    data.weights.w_dec = r.mat();
    if (r.u8()) data.weights.decay_logits = r.vec();

    data.duty = r.vec();
    data.beta = r.f64();
    data.inhibition = r.vec();
    data.rsm_adam = read_adam(r);

    data.classifier.input_dim = static_cast<int>(r.u32());
    data.classifier.hidden_dim = static_cast<int>(r.u32());
    data.classifier.output_dim = static_cast<int>(r.u32());
    data.classifier.w1 = r.mat();
    data.classifier.b1 = r.vec();
    data.classifier.w2 = r.mat();
    data.classifier.b2 = r.vec();
    data.classifier.adam = read_adam(r);

    const std::uint32_t rng_count = r.u32();
    for (std::uint32_t i = 0; i < rng_count; ++i) data.rng_states.push_back(r.str());

    const std::uint32_t vocab_count = r.u32();
    for (std::uint32_t i = 0; i < vocab_count; ++i) data.vocab_words.push_back(r.str());
    data.embedding_dim = static_cast<int>(r.u32());
    const std::uint32_t emb_count = r.u32();
    for (std::uint32_t i = 0; i < emb_count; ++i) data.embedding_vectors.push_back(r.vec());
    return data;
}

}  // namespace brsm
