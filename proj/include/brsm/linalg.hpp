#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "brsm/common.hpp"

namespace brsm {

using Vector = std::vector<double>;

// Deterministic RNG. Wraps mt19937_64 but derives doubles from the raw
// 64-bit stream directly, so identical seeds give identical draw sequences
// on every platform (std::uniform_real_distribution makes no such promise).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
    int uniform_int(int n) {
        require(n > 0, "Rng::uniform_int: n must be positive");
        return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
    }

    // Marsaglia polar method, hand-rolled for cross-platform determinism.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    // Engine state as text, for checkpointing.
    std::string serialize() const;
    static Rng deserialize(const std::string& text);

  private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Dense row-major matrix. Shape is fixed at construction.
class Matrix {
  public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(check_shape(rows, cols), fill) {}

    static Matrix identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

    double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
    const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

  private:
    static std::size_t check_shape(int rows, int cols) {
        require_dim(rows > 0 && cols > 0, "Matrix: dimensions must be positive");
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }

    int rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

// y = M v
Vector matvec(const Matrix& m, const Vector& v);
// y = M^T v
Vector matvec_transpose(const Matrix& m, const Vector& v);

// result += scale * outer(u, v); u indexes rows, v indexes columns.
// Rows where u is exactly zero are skipped, which matters for sparse
// activations.
void add_outer(Matrix& result, const Vector& u, const Vector& v, double scale = 1.0);

enum class InitScheme { UniformScaled, Zeros };

// UniformScaled draws each entry from [-1/sqrt(fan_in), +1/sqrt(fan_in)]
// where fan_in = cols.
Matrix init_weights(int rows, int cols, InitScheme scheme, Rng& rng);

// Central finite differences: (f(x + h e_i) - f(x - h e_i)) / 2h.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x, double h);

double dot(const Vector& a, const Vector& b);
bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

}  // namespace brsm
