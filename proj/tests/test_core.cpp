#include <doctest.h>

#include <cmath>
#include <set>

#include "brsm/core.hpp"
#include "brsm/metrics.hpp"

using namespace brsm;

namespace {

LayerGeometry geom(int m, int n, int k, int d_in) {
    LayerGeometry g;
    g.groups = m;
    g.cells_per_group = n;
    g.winners = k;
    g.input_dim = d_in;
    return g;
}

}  // namespace

TEST_CASE("ff_contribution basics") {
    const Matrix id = Matrix::identity(2);
    CHECK(ff_contribution(id, Vector{0.5, 0.25}) == Vector{0.5, 0.25});
    CHECK(ff_contribution(id, Vector{0.0, 0.0}) == Vector{0.0, 0.0});

    Matrix m(2, 2);
    m.at(0, 0) = 1;
    m.at(0, 1) = 2;
    m.at(1, 0) = 3;
    m.at(1, 1) = 4;
    CHECK(ff_contribution(m, Vector{1.0, -1.0}) == Vector{-1.0, -1.0});
}

TEST_CASE("rec_contribution basics") {
    const Matrix id = Matrix::identity(4);
    CHECK(rec_contribution(id, Vector(4, 0.0)) == Vector(4, 0.0));

    Vector e3(4, 0.0);
    e3[3] = 1.0;
    CHECK(rec_contribution(id, e3) == e3);

    Rng rng(2);
    Matrix w = init_weights(4, 4, InitScheme::UniformScaled, rng);
    Vector x{0.1, 0.2, 0.3, 0.4};
    CHECK(rec_contribution(w, x) == matvec(w, x));
}

TEST_CASE("combine_boost broadcasts the group sum") {
    SUBCASE("boost disabled reduces to plain sum") {
        const Vector sigma =
            combine_boost(Vector{1.0, 2.0}, Vector{0.1, 0.2, 0.3, 0.4}, Vector(4, 1.0), 2, 2);
        CHECK(sigma == Vector{1.1, 1.2, 2.3, 2.4});
    }
    SUBCASE("hand arithmetic") {
        CHECK(combine_boost(Vector{1.0}, Vector{2.0}, Vector{3.0}, 1, 1) == Vector{9.0});
    }
    SUBCASE("zero recurrent input copies the group value") {
        const Vector sigma =
            combine_boost(Vector{0.7, -0.3}, Vector(4, 0.0), Vector(4, 1.0), 2, 2);
        CHECK(sigma == Vector{0.7, 0.7, -0.3, -0.3});
    }
    SUBCASE("non-positive boost rejected") {
        CHECK_THROWS_AS(combine_boost(Vector{1.0}, Vector{0.0}, Vector{0.0}, 1, 1), Error);
    }
}

TEST_CASE("topk_masks picks cells and groups") {
    // sigma rows: (3,1), (2,5), (0,-1); strengths 3, 5, 0.
    const Vector sigma{3, 1, 2, 5, 0, -1};
    const Masks masks = topk_masks(sigma, geom(3, 2, 2, 1));
    CHECK(masks.group_active == std::vector<std::uint8_t>{1, 1, 0});
    CHECK(masks.group_winner == std::vector<int>{0, 1, 0});
}

TEST_CASE("topk_masks with k = m activates everything") {
    const Vector sigma{0.5, -2.0, 1.0};
    const Masks masks = topk_masks(sigma, geom(3, 1, 3, 1));
    CHECK(masks.group_active == std::vector<std::uint8_t>{1, 1, 1});
}

TEST_CASE("topk_masks breaks ties toward the lowest index") {
    const Vector sigma(5, 1.0);
    const Masks masks = topk_masks(sigma, geom(5, 1, 2, 1));
    CHECK(masks.group_active == std::vector<std::uint8_t>{1, 1, 0, 0, 0});
}

TEST_CASE("topk_masks rejects NaN") {
    Vector sigma{1.0, std::nan(""), 0.0};
    CHECK_THROWS_AS(topk_masks(sigma, geom(3, 1, 1, 1)), Error);
}

TEST_CASE("partition winner budgets") {
    SUBCASE("single value follows the floor formula") {
        PartitionSpec parts;
        parts.blocks = {{PartitionKind::RecurrentOnly, 850},
                        {PartitionKind::Integrated, 150}};
        // floor(120 * 850 / 1000) = 102 before remainder distribution
        const std::vector<int> counts = parts.winner_counts(120);
        CHECK(counts[0] >= 102);
        CHECK(counts[0] + counts[1] == 120);
    }
    SUBCASE("paper allocation 7/85/8 of 1000 cells at k=120") {
        PartitionSpec parts;
        parts.blocks = {{PartitionKind::FeedForwardOnly, 70},
                        {PartitionKind::RecurrentOnly, 850},
                        {PartitionKind::Integrated, 80}};
        // floors (8, 102, 9); remainder 1 goes to the largest block
        CHECK(parts.winner_counts(120) == std::vector<int>{8, 103, 9});
    }
    SUBCASE("zero budget is a configuration error") {
        PartitionSpec parts;
        parts.blocks = {{PartitionKind::FeedForwardOnly, 1},
                        {PartitionKind::RecurrentOnly, 999}};
        CHECK_THROWS_AS(parts.winner_counts(2), ConfigError);
    }
}

TEST_CASE("partitioned_topk with one integrated partition equals topk_masks") {
    LayerGeometry g = geom(6, 1, 3, 1);
    PartitionSpec parts;
    parts.blocks = {{PartitionKind::Integrated, 6}};
    g.partitions = parts;
    const Vector sigma{0.3, -0.1, 0.9, 0.2, 0.8, 0.7};
    const Masks a = partitioned_topk(sigma, g);
    const Masks b = topk_masks(sigma, geom(6, 1, 3, 1));
    CHECK(a.group_active == b.group_active);
}

TEST_CASE("partitioned_topk selects within each block") {
    LayerGeometry g = geom(6, 1, 2, 1);
    PartitionSpec parts;
    parts.blocks = {{PartitionKind::FeedForwardOnly, 3}, {PartitionKind::RecurrentOnly, 3}};
    g.partitions = parts;
    // Best cell overall lives in block 0, but each block gets one winner.
    const Vector sigma{5.0, 4.0, 3.0, 0.1, 0.3, 0.2};
    const Masks masks = partitioned_topk(sigma, g);
    CHECK(masks.group_active == std::vector<std::uint8_t>{1, 0, 0, 0, 1, 0});
}

TEST_CASE("activate applies tanh only at unmasked cells") {
    const Vector sigma{1.0, 0.0, -0.5, 2.0};
    Masks masks;
    masks.group_active = {1, 0};
    masks.group_winner = {0, 1};
    const Vector y = activate(sigma, masks, 2, 2);
    CHECK(y[0] == doctest::Approx(std::tanh(1.0)));
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 0.0);
    CHECK(y[3] == 0.0);  // group masked out entirely

    Masks none;
    none.group_active = {0, 0};
    none.group_winner = {0, 0};
    CHECK(activate(sigma, none, 2, 2) == Vector(4, 0.0));

    // A winning cell with sigma exactly zero stays exactly zero.
    Masks all;
    all.group_active = {1, 1};
    all.group_winner = {1, 1};
    const Vector y2 = activate(sigma, all, 2, 2);
    CHECK(y2[1] == 0.0);
}

TEST_CASE("activate at sigma 1 gives tanh(1)") {
    Masks masks;
    masks.group_active = {1};
    masks.group_winner = {0};
    const Vector y = activate(Vector{1.0}, masks, 1, 1);
    CHECK(y[0] == doctest::Approx(0.7616).epsilon(1e-4));
}

TEST_CASE("group_max semantics") {
    SUBCASE("flattened mode is the identity") {
        const Vector y{0.3, -0.2, 0.0};
        CHECK(group_max(y, 3, 1) == y);
    }
    SUBCASE("plain rows") {
        CHECK(group_max(Vector{0.0, 0.7}, 1, 2) == Vector{0.7});
    }
    SUBCASE("literal max, not max magnitude") {
        CHECK(group_max(Vector{-0.5, 0.0}, 1, 2) == Vector{0.0});
    }
}

TEST_CASE("decode is a linear map") {
    CHECK(decode(Matrix::identity(3), Vector{1.0, 2.0, 3.0}) == Vector{1.0, 2.0, 3.0});
    CHECK(decode(Matrix::identity(3), Vector(3, 0.0)) == Vector(3, 0.0));
    Rng rng(4);
    Matrix w = init_weights(5, 3, InitScheme::UniformScaled, rng);
    Vector y{0.1, -0.2, 0.3};
    CHECK(decode(w, y) == matvec(w, y));
}

TEST_CASE("update_memory merge rules") {
    SUBCASE("zero decay keeps only the activation") {
        CHECK(update_memory(Vector{0.9, 0.2}, Vector{0.0, 0.6}, Vector(2, 0.0)) ==
              Vector{0.0, 0.6});
    }
    SUBCASE("hand example") {
        CHECK(update_memory(Vector{0.9, 0.2}, Vector{0.0, 0.6}, Vector(2, 0.5)) ==
              Vector{0.45, 0.6});
    }
    SUBCASE("zero activation leaves a pure decay") {
        const Vector merged = update_memory(Vector{0.5, 0.8}, Vector(2, 0.0), Vector(2, 0.99));
        CHECK(merged[0] == doctest::Approx(0.495));
        CHECK(merged[1] == doctest::Approx(0.792));
    }
    SUBCASE("negative activations are clamped before the max") {
        CHECK(update_memory(Vector{0.0}, Vector{-0.9}, Vector{0.5}) == Vector{0.0});
    }
    SUBCASE("decay outside range throws") {
        CHECK_THROWS_AS(update_memory(Vector{0.1}, Vector{0.0}, Vector{1.0}), Error);
        CHECK_THROWS_AS(update_memory(Vector{0.1}, Vector{0.0}, Vector{-0.1}), Error);
    }
    SUBCASE("branch flags mark where the decay won") {
        std::vector<std::uint8_t> branch;
        update_memory(Vector{0.9, 0.1}, Vector{0.2, 0.6}, Vector(2, 0.5), &branch);
        CHECK(branch == std::vector<std::uint8_t>{1, 0});
    }
}

TEST_CASE("normalize_recurrent") {
    SUBCASE("normalizes to unit sum") {
        const Vector x = normalize_recurrent(Vector{0.45, 0.6});
        CHECK(x[0] == doctest::Approx(0.428571).epsilon(1e-5));
        CHECK(x[1] == doctest::Approx(0.571429).epsilon(1e-5));
        CHECK(x[0] + x[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("empty trace stays zero") {
        CHECK(normalize_recurrent(Vector(4, 0.0)) == Vector(4, 0.0));
    }
    SUBCASE("uniform trace gives uniform input") {
        const Vector x = normalize_recurrent(Vector(5, 0.3));
        for (double v : x) CHECK(v == doctest::Approx(0.2));
    }
    SUBCASE("negative trace entries throw") {
        CHECK_THROWS_AS(normalize_recurrent(Vector{0.1, -0.2}), Error);
    }
}

TEST_CASE("update_duty follows the moving average") {
    Vector d{0.1};
    update_duty(d, std::vector<int>{}, 0.01);
    CHECK(d[0] == doctest::Approx(0.099));

    Vector ones{1.0};
    update_duty(ones, std::vector<int>{0}, 0.01);
    CHECK(ones[0] == doctest::Approx(1.0));

    Vector zeros{0.0};
    update_duty(zeros, std::vector<int>{}, 0.01);
    CHECK(zeros[0] == 0.0);
}

TEST_CASE("duty converges to the expected sparseness under random winners") {
    const int cells = 40, k = 8;
    const double alpha = 0.02, a_hat = static_cast<double>(k) / cells;
    Vector duty(cells, 0.0);
    Rng rng(31);
    const int steps = static_cast<int>(10.0 / alpha);
    for (int t = 0; t < steps; ++t) {
        std::vector<int> winners;
        std::set<int> chosen;
        while (static_cast<int>(chosen.size()) < k) chosen.insert(rng.uniform_int(cells));
        winners.assign(chosen.begin(), chosen.end());
        update_duty(duty, winners, alpha);
    }
    double mean = 0.0;
    for (double d : duty) mean += d;
    mean /= cells;
    CHECK(std::fabs(mean - a_hat) <= 0.1 * a_hat);
}

TEST_CASE("compute_boost") {
    SUBCASE("equilibrium duty gives unit boost") {
        CHECK(compute_boost(Vector{0.05333}, 1.2, 0.05333)[0] == doctest::Approx(1.0));
    }
    SUBCASE("zero strength disables boosting") {
        CHECK(compute_boost(Vector{0.0, 0.5, 1.0}, 0.0, 0.1) == Vector(3, 1.0));
    }
    SUBCASE("idle cell at paper constants") {
        // beta = 1.2, a_hat = 80/1500
        const double a_hat = 80.0 / 1500.0;
        CHECK(compute_boost(Vector{0.0}, 1.2, a_hat)[0] == doctest::Approx(1.0661).epsilon(1e-4));
    }
    SUBCASE("monotone: busier cells get smaller boosts") {
        const Vector b = compute_boost(Vector{0.1, 0.2, 0.4}, 1.2, 0.2);
        CHECK(b[0] > b[1]);
        CHECK(b[1] > b[2]);
    }
}

TEST_CASE("boost neutrality: equal duty cycles do not change the winner set") {
    Rng rng(17);
    LayerGeometry g = geom(10, 1, 3, 4);
    for (int trial = 0; trial < 20; ++trial) {
        Vector ff(10), rec(10);
        for (auto& v : ff) v = rng.uniform(-1.0, 1.0);
        for (auto& v : rec) v = rng.uniform(-1.0, 1.0);
        const Vector plain = combine_boost(ff, rec, Vector(10, 1.0), 10, 1);
        const Vector boosted = combine_boost(ff, rec, compute_boost(Vector(10, 0.07), 1.2, 0.3),
                                             10, 1);
        CHECK(topk_masks(plain, g).group_active == topk_masks(boosted, g).group_active);
    }
}

TEST_CASE("forward_step on a zeroed single-cell layer") {
    LayerGeometry g = geom(1, 1, 1, 2);
    RsmOptions opts;
    LayerWeights w;
    w.w_ff = Matrix(1, 2);
    w.w_rec = Matrix(1, 1);
    w.w_dec = Matrix(2, 1);
    RsmLayer layer(g, opts, w);
    LayerState state = layer.make_state();
    const StepOutput out = layer.forward(Vector{0.0, 0.0}, state);
    CHECK(out.prediction == Vector{0.0, 0.0});
    CHECK(state.trace == Vector{0.0});
}

TEST_CASE("forward_step single cell closed form") {
    // m = n = k = 1: prediction = w_dec * tanh(b * (w_ff x + w_rec xB)).
    LayerGeometry g = geom(1, 1, 1, 1);
    RsmOptions opts;
    opts.strategy = UtilizationStrategy::Boosting;
    opts.boost_strength = 1.2;
    LayerWeights w;
    w.w_ff = Matrix(1, 1);
    w.w_ff.at(0, 0) = 0.8;
    w.w_rec = Matrix(1, 1);
    w.w_rec.at(0, 0) = 0.5;
    w.w_dec = Matrix(1, 1);
    w.w_dec.at(0, 0) = -1.3;
    RsmLayer layer(g, opts, w);
    LayerState state = layer.make_state();

    layer.forward(Vector{0.6}, state);  // populates the trace

    // Second step: the single positive trace cell normalizes to xB = 1.
    const double duty = layer.duty()[0];
    const double boost = std::exp(1.2 * (1.0 - duty));
    const StepOutput out = layer.forward(Vector{-0.4}, state);
    const double expect = -1.3 * std::tanh(boost * (0.8 * -0.4 + 0.5 * 1.0));
    CHECK(out.prediction[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("forward_step micro instance matches a hand-composed trace") {
    LayerGeometry g = geom(3, 1, 2, 2);
    RsmOptions opts;
    opts.strategy = UtilizationStrategy::Boosting;
    Rng rng(77);
    RsmLayer layer(g, opts, rng);
    LayerState state = layer.make_state();
    const Vector x1{0.9, -0.2};
    layer.forward(x1, state);

    // Recompute the second step from the primitive operations.
    const Vector x2{-0.5, 0.4};
    const Vector decay = layer.effective_decay();
    const Vector merged = update_memory(state.prev_trace, state.prev_output, decay);
    const Vector xb = normalize_recurrent(merged);
    const Vector ff = ff_contribution(layer.weights().w_ff, x2);
    const Vector rec = rec_contribution(layer.weights().w_rec, xb);
    const Vector boost =
        compute_boost(layer.duty(), layer.boost_strength(), g.expected_sparseness());
    const Vector sigma = combine_boost(ff, rec, boost, 3, 1);
    const Masks masks = topk_masks(sigma, g);
    const Vector y = activate(sigma, masks, 3, 1);
    const Vector ylam = group_max(y, 3, 1);
    const Vector expect = decode(layer.weights().w_dec, ylam);

    const StepOutput out = layer.forward(x2, state);
    for (int i = 0; i < 2; ++i) CHECK(out.prediction[i] == doctest::Approx(expect[i]));
    CHECK(out.rec_input == xb);
}

TEST_CASE("sparsity and state invariants hold over random steps") {
    Rng rng(5150);
    for (int round = 0; round < 30; ++round) {
        const int m = 2 + rng.uniform_int(6);
        const int n = 1 + rng.uniform_int(2);
        const int k = 1 + rng.uniform_int(m);
        const int d = 2 + rng.uniform_int(5);
        LayerGeometry g = geom(m, n, k, d);
        RsmOptions opts;
        opts.strategy = round % 3 == 0 ? UtilizationStrategy::None
                                       : UtilizationStrategy::Boosting;
        opts.trainable_decay = round % 2 == 1;
        Rng init(rng.next_u64());
        RsmLayer layer(g, opts, init);
        LayerState state = layer.make_state();
        for (int t = 0; t < 50; ++t) {
            Vector x(d);
            for (double& v : x) v = rng.uniform(-1.5, 1.5);
            const StepOutput out = layer.forward(x, state);

            int active_cells = 0;
            for (double v : out.activation)
                if (v != 0.0) ++active_cells;
            CHECK(active_cells <= k);
            CHECK(static_cast<int>(out.winner_cells.size()) == k);

            // One winner per active group, none elsewhere.
            for (int gi = 0; gi < m; ++gi) {
                int nonzero = 0;
                for (int c = 0; c < n; ++c)
                    if (out.activation[gi * n + c] != 0.0) ++nonzero;
                CHECK(nonzero <= 1);
                if (!out.masks.group_active[gi]) CHECK(nonzero == 0);
            }

            double sum = 0.0;
            for (double v : state.rec_input) sum += v;
            CHECK((std::fabs(sum - 1.0) <= 1e-12 || sum == 0.0));
            for (double v : state.trace) {
                CHECK(v >= 0.0);
                CHECK(v < 1.0);
            }
            for (double v : layer.duty()) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
}

TEST_CASE("exactly k distinct positive cells win in non-partitioned mode") {
    Rng rng(808);
    LayerGeometry g = geom(8, 1, 3, 3);
    RsmOptions opts;
    Rng init(4);
    RsmLayer layer(g, opts, init);
    LayerState state = layer.make_state();
    for (int t = 0; t < 20; ++t) {
        Vector x(3);
        for (double& v : x) v = rng.uniform(0.5, 1.5);
        const StepOutput out = layer.forward(x, state);
        int positive = 0;
        for (int i = 0; i < 8; ++i)
            if (out.sigma[i] > 0.0) ++positive;
        int active = 0;
        for (double v : out.activation)
            if (v != 0.0) ++active;
        if (positive >= 3) CHECK(active == 3);
    }
}

TEST_CASE("flattened equivalence: n=1 group max is the identity") {
    Rng rng(66);
    LayerGeometry g = geom(5, 1, 2, 3);
    RsmOptions opts;
    RsmLayer layer(g, opts, rng);
    LayerState state = layer.make_state();
    Vector x{0.2, -0.1, 0.7};
    const StepOutput out = layer.forward(x, state);
    CHECK(out.group_max_value == out.activation);
    for (int w : out.masks.group_winner) CHECK(w == 0);
}

TEST_CASE("inhibition strategy suppresses immediate re-selection") {
    LayerGeometry g = geom(4, 1, 1, 1);
    RsmOptions opts;
    opts.strategy = UtilizationStrategy::Inhibition;
    opts.inhibition_strength = 10.0;  // dominate the tiny weights
    opts.inhibition_decay = 0.5;
    Rng rng(12);
    RsmLayer layer(g, opts, rng);
    LayerState state = layer.make_state();
    const Vector x{1.0};
    const StepOutput first = layer.forward(x, state);
    const StepOutput second = layer.forward(x, state);
    CHECK(first.winner_cells != second.winner_cells);
}

TEST_CASE("geometry validation") {
    CHECK_THROWS_AS(geom(3, 1, 4, 1).validate(), DimensionError);  // k > m
    LayerGeometry g = geom(4, 2, 2, 1);
    PartitionSpec parts;
    parts.blocks = {{PartitionKind::Integrated, 8}};
    g.partitions = parts;
    CHECK_THROWS_AS(g.validate(), ConfigError);  // partitions need n = 1
}
