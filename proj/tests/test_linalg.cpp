#include <doctest.h>

#include <cmath>

#include "brsm/linalg.hpp"

using namespace brsm;

TEST_CASE("matvec identity and annihilator") {
    const Matrix id = Matrix::identity(3);
    const Vector v{1.0, 2.0, 3.0};
    CHECK(matvec(id, v) == Vector{1.0, 2.0, 3.0});

    const Matrix zeros(2, 3);
    CHECK(matvec(zeros, Vector{1.0, 1.0, 1.0}) == Vector{0.0, 0.0});
}

TEST_CASE("matvec hand arithmetic") {
    Matrix m(2, 2);
    m.at(0, 0) = 1;
    m.at(0, 1) = 2;
    m.at(1, 0) = 3;
    m.at(1, 1) = 4;
    CHECK(matvec(m, Vector{1.0, 1.0}) == Vector{3.0, 7.0});
}

TEST_CASE("matvec shape mismatch throws") {
    const Matrix m(2, 3);
    CHECK_THROWS_AS(matvec(m, Vector{1.0, 2.0}), DimensionError);
}

TEST_CASE("matvec distributes over vector addition") {
    Rng rng(11);
    Matrix m = init_weights(7, 5, InitScheme::UniformScaled, rng);
    for (int trial = 0; trial < 50; ++trial) {
        Vector u(5), v(5), sum(5);
        for (int i = 0; i < 5; ++i) {
            u[i] = rng.uniform(-2.0, 2.0);
            v[i] = rng.uniform(-2.0, 2.0);
            sum[i] = u[i] + v[i];
        }
        const Vector lhs = matvec(m, sum);
        const Vector mu = matvec(m, u), mv = matvec(m, v);
        for (int r = 0; r < 7; ++r) {
            const double rhs = mu[r] + mv[r];
            CHECK(std::fabs(lhs[r] - rhs) <= 1e-12 * std::max(1.0, std::fabs(rhs)));
        }
    }
}

TEST_CASE("matvec_transpose agrees with explicit transpose") {
    Rng rng(3);
    Matrix m = init_weights(4, 6, InitScheme::UniformScaled, rng);
    Vector v{0.5, -1.0, 2.0, 0.25};
    const Vector got = matvec_transpose(m, v);
    for (int c = 0; c < 6; ++c) {
        double want = 0.0;
        for (int r = 0; r < 4; ++r) want += m.at(r, c) * v[r];
        CHECK(got[c] == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("init_weights zeros scheme") {
    Rng rng(1);
    const Matrix m = init_weights(2, 2, InitScheme::Zeros, rng);
    CHECK(m.data() == std::vector<double>{0.0, 0.0, 0.0, 0.0});
}

TEST_CASE("init_weights seeded determinism is bit identical") {
    Rng a(42), b(42);
    const Matrix ma = init_weights(13, 17, InitScheme::UniformScaled, a);
    const Matrix mb = init_weights(13, 17, InitScheme::UniformScaled, b);
    CHECK(ma.data() == mb.data());
}

TEST_CASE("init_weights bound follows fan-in") {
    Rng rng(9);
    const Matrix m = init_weights(50, 100, InitScheme::UniformScaled, rng);
    for (double w : m.data()) CHECK(std::fabs(w) <= 0.1);
}

TEST_CASE("init_weights rejects non-positive dimensions") {
    Rng rng(1);
    CHECK_THROWS_AS(init_weights(0, 3, InitScheme::Zeros, rng), DimensionError);
}

TEST_CASE("finite_diff_grad on quadratic") {
    auto f = [](const Vector& x) { return x[0] * x[0]; };
    const Vector g = finite_diff_grad(f, Vector{3.0}, 1e-4);
    CHECK(std::fabs(g[0] - 6.0) <= 1e-6);
}

TEST_CASE("finite_diff_grad on constant and sum") {
    auto constant = [](const Vector&) { return 7.5; };
    for (double g : finite_diff_grad(constant, Vector{1.0, -2.0, 0.5}, 1e-4))
        CHECK(g == doctest::Approx(0.0).epsilon(1e-12));

    auto total = [](const Vector& x) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    };
    for (double g : finite_diff_grad(total, Vector{1.0, 2.0, 3.0}, 1e-4))
        CHECK(g == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("finite_diff_grad matches analytic gradient of a quadratic form") {
    // f(x) = x^T A x has gradient (A + A^T) x.
    Rng rng(5);
    Matrix a = init_weights(4, 4, InitScheme::UniformScaled, rng);
    Vector x{0.3, -0.7, 1.1, 0.2};
    auto f = [&](const Vector& p) { return dot(p, matvec(a, p)); };
    const Vector numeric = finite_diff_grad(f, x, 1e-4);
    for (int i = 0; i < 4; ++i) {
        double analytic = 0.0;
        for (int j = 0; j < 4; ++j) analytic += (a.at(i, j) + a.at(j, i)) * x[j];
        CHECK(std::fabs(numeric[i] - analytic) <=
              1e-6 * std::max(1.0, std::fabs(analytic)));
    }
}

TEST_CASE("finite_diff_grad rejects non-finite objectives") {
    auto f = [](const Vector& x) { return std::log(x[0]); };
    CHECK_THROWS_AS(finite_diff_grad(f, Vector{0.0}, 1e-3), Error);
}

TEST_CASE("rng gives identical streams for identical seeds") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
    CHECK(a.uniform_int(17) == b.uniform_int(17));
}

TEST_CASE("rng serialization resumes the stream") {
    Rng a(7);
    for (int i = 0; i < 5; ++i) a.uniform();
    const std::string blob = a.serialize();
    Rng b = Rng::deserialize(blob);
    for (int i = 0; i < 20; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("add_outer accumulates scaled outer product") {
    Matrix acc(2, 3);
    add_outer(acc, Vector{1.0, 0.0}, Vector{1.0, 2.0, 3.0}, 2.0);
    CHECK(acc.at(0, 1) == 4.0);
    CHECK(acc.at(1, 2) == 0.0);  // zero row skipped
}
