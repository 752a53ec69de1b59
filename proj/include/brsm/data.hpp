#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "brsm/linalg.hpp"

namespace brsm {

// ---------------------------------------------------------------------------
// IDX containers (big-endian; magic 2051 for images, 2049 for labels)
// ---------------------------------------------------------------------------

struct IdxImages {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<Vector> images;  // flattened, scaled to [0, 1]

    int dim() const { return rows * cols; }
};

struct IdxLabels {
    std::vector<int> labels;
};

IdxImages read_idx_images(std::span<const std::uint8_t> bytes);
IdxLabels read_idx_labels(std::span<const std::uint8_t> bytes);
IdxImages read_idx_images_file(const std::string& path);
IdxLabels read_idx_labels_file(const std::string& path);
std::vector<std::uint8_t> write_idx_images(const IdxImages& data);
std::vector<std::uint8_t> write_idx_labels(const IdxLabels& data);

// ---------------------------------------------------------------------------
// Observation pools
// ---------------------------------------------------------------------------

enum class ObserveMode { Random, Fixed };

// A set of images per label. Random mode draws uniformly (partially
// observable); fixed mode always returns the label's first image.
class ImagePool {
  public:
    ImagePool(std::vector<std::vector<Vector>> by_label, int dim);

    static ImagePool from_mnist(const IdxImages& images, const IdxLabels& labels);
    // Per label: a fixed random prototype (variant 0) plus noisy copies.
    static ImagePool synthetic(int num_labels, int variants, int dim, double noise, Rng& rng);

    int dim() const { return dim_; }
    int num_labels() const { return static_cast<int>(by_label_.size()); }
    int variants(int label) const;

    const Vector& observe(int label, ObserveMode mode, Rng& rng) const;

  private:
    std::vector<std::vector<Vector>> by_label_;
    int dim_ = 0;
};

// ---------------------------------------------------------------------------
// Word embeddings
// ---------------------------------------------------------------------------

inline constexpr int kSyntheticEmbeddingBits = 14;
inline constexpr int kSyntheticEmbeddingDim = 2 * kSyntheticEmbeddingBits;

// 28-dimensional binary code: the 14-bit left-filled binary encoding of the
// vocabulary index followed by its bitwise complement.
Vector synthetic_embedding(int index, int vocab_size);

struct EmbeddingTable {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> index;
    std::vector<Vector> vectors;
    int dim = 0;
    std::vector<std::string> warnings;  // e.g. duplicate tokens

    bool contains(const std::string& token) const { return index.count(token) > 0; }
    const Vector& vector_for(const std::string& token) const;
};

// token <whitespace> d_1 ... d_D per line; an optional "count dim" header
// line is accepted. Duplicate tokens keep the last definition and add a
// warning.
EmbeddingTable load_embedding_file(const std::string& text);
EmbeddingTable load_embedding_path(const std::string& path);

// ---------------------------------------------------------------------------
// Token streams
// ---------------------------------------------------------------------------

struct Vocabulary {
    std::vector<std::string> words;
    std::unordered_map<std::string, int> index;
    int unk_index = -1;

    int size() const { return static_cast<int>(words.size()); }
    static Vocabulary build(const std::vector<std::string>& tokens,
                            const std::string& unk_token = "<unk>");
};

// Whitespace tokenization; every non-empty line gets an end-of-sentence
// token appended.
std::vector<std::string> tokenize(const std::string& text,
                                  const std::string& eos_token = "<eos>");

// Map tokens to vocabulary indices. Out-of-vocabulary tokens become the
// unknown-word token; with none defined they are an error.
std::vector<int> token_stream(const std::vector<std::string>& tokens, const Vocabulary& vocab);
std::vector<int> token_stream(const std::string& text, const Vocabulary& vocab);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::vector<std::uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace brsm
