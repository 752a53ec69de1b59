#include "brsm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace brsm {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;  // 2051
constexpr std::uint32_t kLabelMagic = 0x00000801;  // 2049
constexpr long kMaxElements = 1L << 30;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    if (offset + 4 > bytes.size()) throw ParseError("idx: truncated header");
    return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
           (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxImages read_idx_images(std::span<const std::uint8_t> bytes) {
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != kImageMagic)
        throw ParseError("idx: bad image magic " + std::to_string(magic) + " (expected 2051)");
    IdxImages out;
    out.count = static_cast<int>(read_be32(bytes, 4));
    out.rows = static_cast<int>(read_be32(bytes, 8));
    out.cols = static_cast<int>(read_be32(bytes, 12));
    if (out.count < 0 || out.rows <= 0 || out.cols <= 0 ||
        static_cast<long>(out.count) * out.rows * out.cols > kMaxElements)
        throw ParseError("idx: image dimension overflow");
    const std::size_t expected = 16 + static_cast<std::size_t>(out.count) * out.dim();
    if (bytes.size() < expected) throw ParseError("idx: truncated image payload");
    out.images.reserve(out.count);
    std::size_t offset = 16;
    for (int i = 0; i < out.count; ++i) {
        Vector img(out.dim());
        for (int p = 0; p < out.dim(); ++p) img[p] = bytes[offset + p] / 255.0;
        offset += out.dim();
        out.images.push_back(std::move(img));
    }
    return out;
}

IdxLabels read_idx_labels(std::span<const std::uint8_t> bytes) {
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != kLabelMagic)
        throw ParseError("idx: bad label magic " + std::to_string(magic) + " (expected 2049)");
    const int count = static_cast<int>(read_be32(bytes, 4));
    if (count < 0 || count > kMaxElements) throw ParseError("idx: label dimension overflow");
    if (bytes.size() < 8 + static_cast<std::size_t>(count))
        throw ParseError("idx: truncated label payload");
    IdxLabels out;
    out.labels.reserve(count);
    for (int i = 0; i < count; ++i) out.labels.push_back(bytes[8 + i]);
    return out;
}

IdxImages read_idx_images_file(const std::string& path) {
    const auto bytes = read_binary_file(path);
    return read_idx_images(bytes);
}

IdxLabels read_idx_labels_file(const std::string& path) {
    const auto bytes = read_binary_file(path);
    return read_idx_labels(bytes);
}

std::vector<std::uint8_t> write_idx_images(const IdxImages& data) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + static_cast<std::size_t>(data.count) * data.dim());
    append_be32(out, kImageMagic);
    append_be32(out, static_cast<std::uint32_t>(data.count));
    append_be32(out, static_cast<std::uint32_t>(data.rows));
    append_be32(out, static_cast<std::uint32_t>(data.cols));
    for (const Vector& img : data.images)
        for (double v : img)
            out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    return out;
}

std::vector<std::uint8_t> write_idx_labels(const IdxLabels& data) {
    std::vector<std::uint8_t> out;
    append_be32(out, kLabelMagic);
    append_be32(out, static_cast<std::uint32_t>(data.labels.size()));
    for (int label : data.labels) out.push_back(static_cast<std::uint8_t>(label));
    return out;
}

ImagePool::ImagePool(std::vector<std::vector<Vector>> by_label, int dim)
    : by_label_(std::move(by_label)), dim_(dim) {
    require(!by_label_.empty(), "ImagePool: no labels");
    for (std::size_t l = 0; l < by_label_.size(); ++l) {
        require(!by_label_[l].empty(),
                "ImagePool: label " + std::to_string(l) + " has no images");
        for (const Vector& img : by_label_[l])
            require_dim(img.size() == static_cast<std::size_t>(dim_),
                        "ImagePool: inconsistent image dimension");
    }
}

ImagePool ImagePool::from_mnist(const IdxImages& images, const IdxLabels& labels) {
    require(images.count == static_cast<int>(labels.labels.size()),
            "ImagePool: image/label counts differ");
    std::vector<std::vector<Vector>> by_label(10);
    for (int i = 0; i < images.count; ++i) {
        const int label = labels.labels[i];
        require(label >= 0 && label <= 9, "ImagePool: label outside 0-9");
        by_label[label].push_back(images.images[i]);
    }
    return ImagePool(std::move(by_label), images.dim());
}

ImagePool ImagePool::synthetic(int num_labels, int variants, int dim, double noise, Rng& rng) {
    require(num_labels >= 1 && variants >= 1 && dim >= 1, "ImagePool: bad synthetic shape");
    require(noise >= 0.0, "ImagePool: noise must be non-negative");
    std::vector<std::vector<Vector>> by_label(num_labels);
    for (int l = 0; l < num_labels; ++l) {
        Vector prototype(dim);
        for (double& v : prototype) v = rng.uniform();
        by_label[l].push_back(prototype);
        for (int k = 1; k < variants; ++k) {
            Vector img(dim);
            for (int p = 0; p < dim; ++p)
                img[p] = std::clamp(prototype[p] + noise * rng.normal(), 0.0, 1.0);
            by_label[l].push_back(std::move(img));
        }
    }
    return ImagePool(std::move(by_label), dim);
}

int ImagePool::variants(int label) const {
    require(label >= 0 && label < num_labels(), "ImagePool: unknown label");
    return static_cast<int>(by_label_[label].size());
}

const Vector& ImagePool::observe(int label, ObserveMode mode, Rng& rng) const {
    require(label >= 0 && label < num_labels(), "ImagePool: unknown label");
    const auto& bucket = by_label_[label];
    if (mode == ObserveMode::Fixed) return bucket[0];
    return bucket[rng.uniform_int(static_cast<int>(bucket.size()))];
}

Vector synthetic_embedding(int index, int vocab_size) {
    require(vocab_size >= 1, "synthetic_embedding: empty vocabulary");
    require(index >= 0 && index < vocab_size, "synthetic_embedding: index outside vocabulary");
    require(index < (1 << kSyntheticEmbeddingBits),
            "synthetic_embedding: index needs more than 14 bits");
    Vector out(kSyntheticEmbeddingDim, 0.0);
    for (int bit = 0; bit < kSyntheticEmbeddingBits; ++bit) {
        const int b = (index >> (kSyntheticEmbeddingBits - 1 - bit)) & 1;
        out[bit] = b;
        out[kSyntheticEmbeddingBits + bit] = 1 - b;
    }
    return out;
}

const Vector& EmbeddingTable::vector_for(const std::string& token) const {
    auto it = index.find(token);
    require(it != index.end(), "EmbeddingTable: token not found: " + token);
    return vectors[it->second];
}

EmbeddingTable load_embedding_file(const std::string& text) {
    EmbeddingTable table;
    std::istringstream is(text);
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string token;
        if (!(ls >> token)) continue;  // blank line
        std::vector<double> values;
        double v;
        while (ls >> v) values.push_back(v);
        if (!ls.eof()) {
            std::string tail;
            ls.clear();
            ls >> tail;
            throw ParseError("embedding: unparseable number near '" + tail + "'");
        }
        if (first) {
            first = false;
            // "count dim" header: a numeric token with exactly one value.
            if (values.size() == 1 &&
                token.find_first_not_of("0123456789") == std::string::npos)
                continue;
        }
        if (values.empty()) throw ParseError("embedding: token '" + token + "' has no values");
        if (table.dim == 0) table.dim = static_cast<int>(values.size());
        if (static_cast<int>(values.size()) != table.dim)
            throw ParseError("embedding: ragged dimensions at token '" + token + "'");
        auto it = table.index.find(token);
        if (it != table.index.end()) {
            table.warnings.push_back("duplicate token '" + token + "': last definition wins");
            table.vectors[it->second] = std::move(values);
        } else {
            table.index.emplace(token, static_cast<int>(table.tokens.size()));
            table.tokens.push_back(token);
            table.vectors.push_back(std::move(values));
        }
    }
    if (table.tokens.empty()) throw ParseError("embedding: no entries found");
    return table;
}

EmbeddingTable load_embedding_path(const std::string& path) {
    return load_embedding_file(read_text_file(path));
}

Vocabulary Vocabulary::build(const std::vector<std::string>& tokens,
                             const std::string& unk_token) {
    Vocabulary vocab;
    for (const std::string& t : tokens) {
        if (vocab.index.count(t)) continue;
        vocab.index.emplace(t, static_cast<int>(vocab.words.size()));
        vocab.words.push_back(t);
    }
    auto it = vocab.index.find(unk_token);
    vocab.unk_index = it == vocab.index.end() ? -1 : it->second;
    return vocab;
}

std::vector<std::string> tokenize(const std::string& text, const std::string& eos_token) {
    std::vector<std::string> tokens;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string token;
        bool any = false;
        while (ls >> token) {
            tokens.push_back(token);
            any = true;
        }
        if (any && !eos_token.empty()) tokens.push_back(eos_token);
    }
    return tokens;
}

std::vector<int> token_stream(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const std::string& t : tokens) {
        auto it = vocab.index.find(t);
        if (it != vocab.index.end()) {
            out.push_back(it->second);
        } else if (vocab.unk_index >= 0) {
            out.push_back(vocab.unk_index);
        } else {
            throw Error("token_stream: out-of-vocabulary token '" + t +
                        "' and no unknown-word token defined");
        }
    }
    return out;
}

std::vector<int> token_stream(const std::string& text, const Vocabulary& vocab) {
    return token_stream(tokenize(text), vocab);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path);
    out << content;
}

std::vector<std::uint8_t> read_binary_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_binary_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
}

}  // namespace brsm
