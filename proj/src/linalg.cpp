#include "brsm/linalg.hpp"

#include <cmath>
#include <sstream>

namespace brsm {

std::string Rng::serialize() const {
    std::ostringstream os;
    os << seed_ << ' ' << gen_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << spare_;
    return os.str();
}

Rng Rng::deserialize(const std::string& text) {
    std::istringstream is(text);
    std::uint64_t seed = 0;
    is >> seed;
    Rng rng(seed);
    int has_spare = 0;
    is >> rng.gen_ >> has_spare >> rng.spare_;
    if (!is) throw ParseError("Rng::deserialize: malformed state string");
    rng.has_spare_ = has_spare != 0;
    return rng;
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Vector matvec(const Matrix& m, const Vector& v) {
    require_dim(m.cols() == static_cast<int>(v.size()),
                "matvec: matrix has " + std::to_string(m.cols()) + " cols, vector has " +
                    std::to_string(v.size()) + " entries");
    Vector out(static_cast<std::size_t>(m.rows()), 0.0);
    for (int r = 0; r < m.rows(); ++r) {
        const double* row = m.row(r);
        double acc = 0.0;
        for (int c = 0; c < m.cols(); ++c) acc += row[c] * v[c];
        out[r] = acc;
    }
    return out;
}

Vector matvec_transpose(const Matrix& m, const Vector& v) {
    require_dim(m.rows() == static_cast<int>(v.size()),
                "matvec_transpose: matrix has " + std::to_string(m.rows()) +
                    " rows, vector has " + std::to_string(v.size()) + " entries");
    Vector out(static_cast<std::size_t>(m.cols()), 0.0);
    for (int r = 0; r < m.rows(); ++r) {
        const double s = v[r];
        if (s == 0.0) continue;
        const double* row = m.row(r);
        for (int c = 0; c < m.cols(); ++c) out[c] += s * row[c];
    }
    return out;
}

void add_outer(Matrix& result, const Vector& u, const Vector& v, double scale) {
    require_dim(result.rows() == static_cast<int>(u.size()) &&
                    result.cols() == static_cast<int>(v.size()),
                "add_outer: shape mismatch");
    for (int r = 0; r < result.rows(); ++r) {
        const double s = scale * u[r];
        if (s == 0.0) continue;
        double* row = result.row(r);
        for (int c = 0; c < result.cols(); ++c) row[c] += s * v[c];
    }
}

Matrix init_weights(int rows, int cols, InitScheme scheme, Rng& rng) {
    require_dim(rows > 0 && cols > 0, "init_weights: dimensions must be positive");
    Matrix m(rows, cols);
    if (scheme == InitScheme::Zeros) return m;
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& w : m.data()) w = rng.uniform(-bound, bound);
    return m;
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x,
                        double h) {
    require(h > 0.0, "finite_diff_grad: step size must be positive");
    Vector grad(x.size(), 0.0);
    Vector probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(up) || !std::isfinite(down))
            throw Error("finite_diff_grad: objective returned a non-finite value");
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double dot(const Vector& a, const Vector& b) {
    require_dim(a.size() == b.size(), "dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

bool all_finite(const Vector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Matrix& m) {
    for (double x : m.data())
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace brsm
