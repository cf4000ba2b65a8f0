#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "cpspan/prototype.hpp"
#include "oracles.hpp"

using namespace cpspan;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> gauss(0.0, scale);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = gauss(engine);
    return m;
}

Matrix permutation_matrix(const std::vector<std::size_t>& sigma) {
    Matrix p(sigma.size(), sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) p(i, sigma[i]) = 1.0;
    return p;
}

// Well-separated prototypes: random directions scaled to pairwise gaps >= gap.
Matrix separated_prototypes(std::size_t k, std::size_t d, double gap, std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    while (true) {
        Matrix c(k, d);
        for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] = gauss(engine) * gap;
        double min_gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = i + 1; j < k; ++j)
                min_gap = std::min(min_gap, std::sqrt(squared_row_distance(c, i, c, j)));
        if (min_gap >= gap) return c;
    }
}

double min_pairwise_gap(const Matrix& c) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = i + 1; j < c.rows(); ++j)
            gap = std::min(gap, std::sqrt(squared_row_distance(c, i, c, j)));
    return gap;
}

}  // namespace

TEST_CASE("kmeans: k=1 returns the global mean and the total scatter") {
    const Matrix points = random_matrix(20, 3, 1);
    const PrototypeSet proto = kmeans(points, 1, 7);
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < 20; ++r) mean += points(r, c);
        mean /= 20.0;
        CHECK(proto.centers(0, c) == doctest::Approx(mean).epsilon(1e-12));
    }
    double scatter = 0.0;
    for (std::size_t r = 0; r < 20; ++r)
        scatter += squared_row_distance(points, r, proto.centers, 0);
    CHECK(proto.inertia == doctest::Approx(scatter).epsilon(1e-12));
}

TEST_CASE("kmeans: two tight pairs split into their midpoints") {
    Matrix points(4, 2);
    points(0, 0) = 0.0;
    points(1, 0) = 1.0;
    points(2, 0) = 10.0;
    points(3, 0) = 11.0;
    const PrototypeSet proto = kmeans(points, 2, 3);
    std::vector<double> xs = {proto.centers(0, 0), proto.centers(1, 0)};
    std::sort(xs.begin(), xs.end());
    CHECK(xs[0] == doctest::Approx(0.5));
    CHECK(xs[1] == doctest::Approx(10.5));
    CHECK(proto.assignments[0] == proto.assignments[1]);
    CHECK(proto.assignments[2] == proto.assignments[3]);
    CHECK(proto.assignments[0] != proto.assignments[2]);
}

TEST_CASE("kmeans: close to a 1000-restart oracle on random data") {
    const Matrix points = random_matrix(40, 2, 11);
    const PrototypeSet proto = kmeans(points, 3, 5);
    const double oracle_best = oracle::best_restart_inertia(points, 3, 1000, 99);
    CHECK(proto.inertia <= oracle_best * 1.05);
}

TEST_CASE("kmeans: centers are the means of their members") {
    const Matrix points = random_matrix(50, 4, 21);
    const PrototypeSet proto = kmeans(points, 4, 9);
    Matrix sums(4, 4);
    std::vector<double> counts(4, 0.0);
    for (std::size_t i = 0; i < 50; ++i) {
        counts[proto.assignments[i]] += 1.0;
        for (std::size_t c = 0; c < 4; ++c) sums(proto.assignments[i], c) += points(i, c);
    }
    for (int k = 0; k < 4; ++k) {
        CHECK(counts[k] > 0.0);  // no empty cluster
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(proto.centers(k, c) == doctest::Approx(sums(k, c) / counts[k]).epsilon(1e-9));
    }
}

TEST_CASE("kmeans: fewer points than clusters is rejected") {
    CHECK_THROWS_AS(kmeans(random_matrix(2, 2, 1), 3, 0), std::invalid_argument);
}

TEST_CASE("kmeans: deterministic per seed") {
    const Matrix points = random_matrix(30, 3, 31);
    const PrototypeSet a = kmeans(points, 3, 17);
    const PrototypeSet b = kmeans(points, 3, 17);
    CHECK(a.centers == b.centers);
    CHECK(a.assignments == b.assignments);
}

TEST_CASE("cost_matrix: squared distances, zero diagonal on identical inputs") {
    const Matrix c = random_matrix(4, 3, 41);
    const Matrix d = cost_matrix(c, c);
    for (std::size_t i = 0; i < 4; ++i) CHECK(d(i, i) == 0.0);

    Matrix a(1, 1), b(1, 1);
    b(0, 0) = 3.0;
    CHECK(cost_matrix(a, b)(0, 0) == doctest::Approx(9.0));

    const Matrix x = random_matrix(4, 5, 42);
    const Matrix y = random_matrix(4, 5, 43);
    const Matrix got = cost_matrix(x, y);
    const Matrix swapped = cost_matrix(y, x);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double expected = 0.0;
            for (std::size_t k = 0; k < 5; ++k)
                expected += (x(i, k) - y(j, k)) * (x(i, k) - y(j, k));
            CHECK(got(i, j) == doctest::Approx(expected).epsilon(1e-12));
            CHECK(got(i, j) == doctest::Approx(swapped(j, i)).epsilon(1e-12));
        }
}

TEST_CASE("hungarian: identity-favoring costs pick the identity") {
    Matrix cost(3, 3, 5.0);
    for (std::size_t i = 0; i < 3; ++i) cost(i, i) = 0.0;
    const AssignmentResult result = hungarian(cost);
    CHECK(result.cost == 0.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(result.row_to_col[i] == i);

    Matrix flip(2, 2);
    flip(0, 1) = 1.0;
    flip(1, 0) = 1.0;
    const AssignmentResult r2 = hungarian(flip);
    CHECK(r2.cost == 0.0);
    CHECK(r2.row_to_col == std::vector<std::size_t>{0, 1});
}

TEST_CASE("hungarian: matches exhaustive search on a random 6x6 cost") {
    const Matrix cost = random_matrix(6, 6, 55);
    const AssignmentResult result = hungarian(cost);
    CHECK(result.cost == doctest::Approx(oracle::brute_force_assignment(cost)).epsilon(1e-12));
}

TEST_CASE("hungarian: exhaustive equivalence over 200 random small instances") {
    std::mt19937_64 engine(77);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + trial % 5;  // 2..6
        const Matrix cost = random_matrix(k, k, engine(), 3.0);
        const AssignmentResult result = hungarian(cost);
        const double best = oracle::brute_force_assignment(cost);
        REQUIRE(result.cost == doctest::Approx(best).epsilon(1e-12));
        // returned permutation must realize the reported cost
        double realized = 0.0;
        for (std::size_t i = 0; i < k; ++i) realized += cost(i, result.row_to_col[i]);
        REQUIRE(realized == doctest::Approx(result.cost).epsilon(1e-12));
    }
}

TEST_CASE("hungarian: rejects non-finite costs") {
    Matrix cost(2, 2);
    cost(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(hungarian(cost), std::invalid_argument);
}

TEST_CASE("project_cycle: permutation matrices are bit-exact fixed points") {
    const Matrix p = permutation_matrix({2, 0, 3, 1});
    Matrix q = p;
    for (int cycle = 0; cycle < 25; ++cycle) q = project_cycle(std::move(q));
    CHECK(q == p);
}

TEST_CASE("project_cycle: the flat doubly stochastic matrix stays put") {
    const std::size_t k = 3;
    Matrix p(k, k, 1.0 / static_cast<double>(k));
    const Matrix q = project_cycle(p);
    for (std::size_t i = 0; i < p.size(); ++i)
        CHECK(q.data()[i] == doctest::Approx(p.data()[i]).epsilon(1e-12));
}

TEST_CASE("project_cycle: random positive starts reach small residuals") {
    std::mt19937_64 engine(88);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix p(4, 4);
        for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = uniform(engine);
        p = project_to_constraints(std::move(p), 50, 0.0);
        CHECK(constraint_residual(p) <= 1e-3);
    }
}

TEST_CASE("prototype_alignment_loss: a planted permutation scores zero") {
    const Matrix c1 = random_matrix(4, 3, 61);
    const std::vector<std::size_t> sigma = {2, 0, 3, 1};
    Matrix c2(4, 3);
    // rows of c2 arranged so that P c2 = c1 with P(i, sigma[i]) = 1
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t c = 0; c < 3; ++c) c2(sigma[i], c) = c1(i, c);
    AlignmentState state;
    state.view_i = 0;
    state.view_j = 1;
    state.relaxed = permutation_matrix(sigma);
    state.hard = state.relaxed;
    CHECK(prototype_alignment_loss({c1, c2}, {state}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("prototype_alignment_loss: swapped scalar prototypes under identity") {
    Matrix c1(2, 1), c2(2, 1);
    c1(1, 0) = 1.0;
    c2(0, 0) = 1.0;
    AlignmentState state;
    state.relaxed = Matrix::identity(2);
    state.hard = state.relaxed;
    state.view_i = 0;
    state.view_j = 1;
    // two unit squared errors, divided by K=2
    CHECK(prototype_alignment_loss({c1, c2}, {state}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("prototype_alignment_loss: three views match a hand-summed oracle") {
    const std::vector<Matrix> centers = {random_matrix(4, 3, 71), random_matrix(4, 3, 72),
                                         random_matrix(4, 3, 73)};
    std::vector<AlignmentState> states;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j) {
            AlignmentState s;
            s.view_i = i;
            s.view_j = j;
            s.relaxed = project_to_constraints(random_matrix(4, 4, 80 + i * 3 + j), 200, 1e-10);
            s.hard = round_to_permutation(s.relaxed);
            states.push_back(std::move(s));
        }
    double expected = 0.0;
    for (const auto& s : states) {
        const Matrix diff = centers[s.view_i] - matmul(s.relaxed, centers[s.view_j]);
        expected += squared_norm(diff) / 4.0;
    }
    CHECK(prototype_alignment_loss(centers, states) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("prototype_alignment_loss: translation-invariant once rows sum to one") {
    const std::vector<Matrix> centers = {random_matrix(5, 3, 91), random_matrix(5, 3, 92)};
    AlignmentState state;
    state.view_i = 0;
    state.view_j = 1;
    state.relaxed = project_to_constraints(random_matrix(5, 5, 93), 5000, 1e-12);
    state.hard = round_to_permutation(state.relaxed);
    const double base = prototype_alignment_loss(centers, {state});

    std::vector<Matrix> shifted = centers;
    const Matrix t = random_matrix(1, 3, 94, 10.0);
    for (Matrix& c : shifted)
        for (std::size_t r = 0; r < c.rows(); ++r)
            for (std::size_t col = 0; col < 3; ++col) c(r, col) += t(0, col);
    CHECK(prototype_alignment_loss(shifted, {state}) == doctest::Approx(base).epsilon(1e-6));
}

TEST_CASE("align_prototypes: identical sets give identity permutations") {
    const Matrix c = separated_prototypes(4, 3, 2.0, 101);
    const auto states = align_prototypes({c, c});
    REQUIRE(states.size() == 1);
    CHECK(states[0].hard == Matrix::identity(4));
    CHECK(prototype_alignment_loss({c, c}, states) == doctest::Approx(0.0));
}

TEST_CASE("align_prototypes: recovers a planted relabeling exactly") {
    const Matrix c1 = separated_prototypes(5, 4, 3.0, 111);
    const std::vector<std::size_t> sigma = {3, 1, 4, 0, 2};
    Matrix c2(5, 4);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t c = 0; c < 4; ++c) c2(sigma[i], c) = c1(i, c);
    const auto states = align_prototypes({c1, c2});
    CHECK(states[0].hard == permutation_matrix(sigma));
}

TEST_CASE("align_prototypes: planted relabeling survives noise below a tenth of the gap") {
    std::mt19937_64 engine(123);
    int recovered = 0;
    const int trials = 50;
    for (int trial = 0; trial < trials; ++trial) {
        for (std::size_t k : {3u, 5u, 7u}) {
            const Matrix c1 = separated_prototypes(k, 4, 2.0, engine());
            const double gap = min_pairwise_gap(c1);
            std::vector<std::size_t> sigma(k);
            std::iota(sigma.begin(), sigma.end(), std::size_t{0});
            std::shuffle(sigma.begin(), sigma.end(), engine);
            Matrix c2(k, 4);
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (std::size_t i = 0; i < k; ++i) {
                Matrix noise(1, 4);
                double norm = 0.0;
                for (std::size_t c = 0; c < 4; ++c) {
                    noise(0, c) = gauss(engine);
                    norm += noise(0, c) * noise(0, c);
                }
                norm = std::sqrt(norm);
                for (std::size_t c = 0; c < 4; ++c)
                    c2(sigma[i], c) = c1(i, c) + noise(0, c) / norm * 0.1 * gap;
            }
            const auto states = align_prototypes({c1, c2});
            if (states[0].hard == permutation_matrix(sigma)) ++recovered;
        }
    }
    CHECK(recovered == trials * 3);
}

TEST_CASE("kmeans: inertia is non-increasing across restarts of lloyd_from") {
    // run lloyd step by step and track the objective
    const Matrix points = random_matrix(60, 3, 131);
    PrototypeSet proto = kmeans(points, 4, 3);
    double previous = std::numeric_limits<double>::infinity();
    Matrix centers = random_matrix(4, 3, 132);
    for (int step = 0; step < 10; ++step) {
        const PrototypeSet next = lloyd_from(points, centers);
        CHECK(next.inertia <= previous + 1e-9);
        previous = next.inertia;
        centers = next.centers;
    }
}

TEST_CASE("tape prototype term: gradient matches finite differences") {
    Matrix ci = random_matrix(3, 2, 141);
    Matrix cj = random_matrix(3, 2, 142);
    Matrix p = project_to_constraints(random_matrix(3, 3, 143), 200, 1e-10);
    auto eval = [&](std::vector<Matrix>* grads) {
        Tape tape;
        const Tape::Var vi = tape.variable(ci);
        const Tape::Var vj = tape.variable(cj);
        const Tape::Var vp = tape.variable(p);
        const Tape::Var loss = prototype_alignment_term(tape, vi, vj, vp);
        if (grads) {
            tape.backward(loss);
            *grads = {tape.grad(vi), tape.grad(vj), tape.grad(vp)};
        }
        return tape.value(loss)(0, 0);
    };
    std::vector<Matrix> analytic;
    eval(&analytic);
    const auto check = oracle::finite_difference_check([&] { return eval(nullptr); },
                                                       {&ci, &cj, &p}, analytic);
    CHECK_MESSAGE(check.ok, "max rel err ", check.max_rel_err);
}
