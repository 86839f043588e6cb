#include <doctest.h>

#include <cmath>
#include <random>

#include "semdepth/ranking.hpp"
#include "test_support.hpp"

using namespace semdepth;
using semdepth::testing::grad_check;

namespace {

RankingBatch tiny_batch(std::vector<Quadruplet> quads, std::vector<double> gamma,
                        std::vector<PointPair> pairs) {
    RankingBatch b;
    b.quadruplets = std::move(quads);
    b.gamma = std::move(gamma);
    b.random_pairs = std::move(pairs);
    return b;
}

// Independent scalar evaluation of the aggregate formula.
double brute_force_total(const Tensor& depth, const Tensor& mask, const RankingBatch& b) {
    auto d = [&](PixCoord p) { return depth.at(p.y, p.x); };
    auto l = [&](PixCoord p) { return mask.at(p.y, p.x) != 0.0 ? 1 : 0; };
    double quad_term = 0.0;
    for (size_t j = 0; j < b.quadruplets.size(); ++j) {
        const Quadruplet& q = b.quadruplets[j];
        double s = 0.0;
        s += pair_loss(d(q.s1), d(q.s2), belonging_indicator(l(q.s1), l(q.s2)));
        s += pair_loss(d(q.s1), d(q.n1), belonging_indicator(l(q.s1), l(q.n1)));
        s += pair_loss(d(q.n1), d(q.n2), belonging_indicator(l(q.n1), l(q.n2)));
        quad_term += b.gamma[j] * s;
    }
    if (!b.quadruplets.empty()) quad_term /= 3.0 * static_cast<double>(b.quadruplets.size());
    double pair_term = 0.0;
    for (const PointPair& p : b.random_pairs)
        pair_term += pair_loss(d(p.p1), d(p.p2), belonging_indicator(l(p.p1), l(p.p2)));
    if (!b.random_pairs.empty()) pair_term /= static_cast<double>(b.random_pairs.size());
    return quad_term + pair_term;
}

}  // namespace

TEST_CASE("belonging indicator truth table") {
    CHECK(belonging_indicator(0, 0) == 0);
    CHECK(belonging_indicator(0, 1) == 1);
    CHECK(belonging_indicator(1, 0) == 1);
    CHECK(belonging_indicator(1, 1) == 0);
    CHECK_THROWS(belonging_indicator(2, 0));
}

TEST_CASE("pair_loss values") {
    CHECK(pair_loss(1.0, 1.0, 0) == doctest::Approx(0.0));
    CHECK(pair_loss(1.0, 1.0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(pair_loss(5.0, 2.0, 0) == doctest::Approx(9.0).epsilon(1e-12));
    // log(1 + e^-8), evaluated independently.
    CHECK(pair_loss(10.0, 2.0, 1) == doctest::Approx(std::log1p(std::exp(-8.0))).epsilon(1e-12));
    CHECK(std::log1p(std::exp(-8.0)) == doctest::Approx(3.3540e-4).epsilon(1e-4));
    CHECK_THROWS(pair_loss(1.0, std::nan(""), 0));
    CHECK_THROWS(pair_loss(1.0, 1.0, 2));
}

TEST_CASE("uncertainty_weight formula and range") {
    CHECK(uncertainty_weight(0.5, 0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(uncertainty_weight(0.9, 0.1) == doctest::Approx(std::exp(-1.0 / 9.0)).epsilon(1e-12));
    CHECK(uncertainty_weight(0.1, 0.9) == doctest::Approx(std::exp(-1.0 / 9.0)).epsilon(1e-12));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-0.5, 1.5);  // includes out-of-range inputs
    for (int i = 0; i < 2000; ++i) {
        const double g = uncertainty_weight(dist(rng), dist(rng));
        CHECK(g >= std::exp(-1.0) - 1e-12);
        CHECK(g <= 1.0 + 1e-12);
    }
}

TEST_CASE("total_ranking_loss simple cases") {
    // Constant depth, constant mask, only O pairs: every term is (d-d)^2 = 0.
    Tensor depth({1, 1, 6, 6}, 3.7);
    Tensor mask({6, 6}, 1.0);
    RankingBatch b = tiny_batch({}, {}, {{{1, 1}, {2, 2}}, {{3, 3}, {3, 4}}});
    Var dv = make_const(depth);
    CHECK(total_ranking_loss(dv, mask, b)->val[0] == doctest::Approx(0.0));

    // Single quadruplet on constant depth: cross pair contributes gamma*ln2/3.
    Tensor mask2({6, 6}, 0.0);
    for (int y = 0; y < 6; ++y)
        for (int x = 3; x < 6; ++x) mask2.at(y, x) = 1.0;
    Quadruplet q;
    q.s1 = {3, 2};
    q.s2 = {4, 2};
    q.n1 = {2, 2};
    q.n2 = {1, 2};
    const double g = 0.8;
    RankingBatch b2 = tiny_batch({q}, {g}, {});
    CHECK(total_ranking_loss(dv, mask2, b2)->val[0] ==
          doctest::Approx(g * std::log(2.0) / 3.0).epsilon(1e-12));

    // Empty batch contributes zero.
    RankingBatch empty;
    CHECK(total_ranking_loss(dv, mask, empty)->val[0] == 0.0);

    // Gamma outside [1/e,1] is rejected.
    RankingBatch bad = tiny_batch({q}, {0.1}, {});
    CHECK_THROWS(total_ranking_loss(dv, mask2, bad));
}

TEST_CASE("total_ranking_loss matches an independent scalar evaluation") {
    std::mt19937_64 rng(7);
    Tensor depth = Tensor::uniform({1, 1, 8, 8}, rng, 1.0, 9.0);
    Tensor mask({8, 8});
    for (std::int64_t i = 0; i < mask.size(); ++i) mask[i] = (rng() % 2) ? 1.0 : 0.0;

    std::vector<Quadruplet> quads;
    std::vector<double> gamma;
    for (int j = 0; j < 5; ++j) {
        Quadruplet q;
        auto rp = [&]() { return PixCoord{static_cast<int>(rng() % 8), static_cast<int>(rng() % 8)}; };
        q.s1 = rp();
        q.s2 = rp();
        q.n1 = rp();
        q.n2 = rp();
        quads.push_back(q);
        gamma.push_back(uncertainty_weight(0.3 + 0.1 * j, 0.9 - 0.1 * j));
    }
    std::vector<PointPair> pairs;
    for (int p = 0; p < 9; ++p) {
        pairs.push_back({{static_cast<int>(rng() % 8), static_cast<int>(rng() % 8)},
                         {static_cast<int>(rng() % 8), static_cast<int>(rng() % 8)}});
    }
    RankingBatch b = tiny_batch(quads, gamma, pairs);
    const double expect = brute_force_total(depth.reshaped({8, 8}), mask, b);
    CHECK(total_ranking_loss(make_const(depth), mask, b)->val[0] ==
          doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("make_ranking_batch weights come from the semantic probabilities") {
    Tensor sem({6, 6}, 0.5);
    sem.at(2, 3) = 0.9;
    sem.at(2, 1) = 0.1;
    Quadruplet q;
    q.s1 = {3, 2};
    q.s2 = {4, 2};
    q.n1 = {1, 2};
    q.n2 = {0, 2};
    SampleSet set;
    set.quadruplets = {q};
    RankingBatch b = make_ranking_batch(set, sem);
    REQUIRE(b.gamma.size() == 1);
    CHECK(b.gamma[0] == doctest::Approx(std::exp(-1.0 / 9.0)).epsilon(1e-12));

    // sem_prob = 0.5 everywhere gives gamma = 1/e for every quadruplet, so the
    // weighted quadruplet term is exactly (1/e) times the unweighted one.
    Tensor depth({1, 1, 6, 6});
    std::mt19937_64 rng(11);
    for (std::int64_t i = 0; i < depth.size(); ++i)
        depth[i] = std::uniform_real_distribution<double>(1.0, 5.0)(rng);
    Tensor mask({6, 6}, 0.0);
    for (int y = 0; y < 6; ++y)
        for (int x = 3; x < 6; ++x) mask.at(y, x) = 1.0;
    Tensor half_sem({6, 6}, 0.5);
    RankingBatch weighted = make_ranking_batch(set, half_sem);
    RankingBatch unweighted = weighted;
    unweighted.gamma.assign(unweighted.gamma.size(), 1.0);
    Var dv = make_const(depth);
    const double w = total_ranking_loss(dv, mask, weighted)->val[0];
    const double u = total_ranking_loss(dv, mask, unweighted)->val[0];
    CHECK(w == doctest::Approx(std::exp(-1.0) * u).epsilon(1e-12));
}

TEST_CASE("ranking loss gradient matches finite differences") {
    std::mt19937_64 rng(13);
    Var depth = make_param(Tensor::uniform({1, 1, 6, 6}, rng, 1.0, 9.0));
    Tensor mask({6, 6});
    for (std::int64_t i = 0; i < mask.size(); ++i) mask[i] = (rng() % 2) ? 1.0 : 0.0;
    Quadruplet q;
    q.s1 = {0, 0};
    q.s2 = {1, 0};
    q.n1 = {2, 0};
    q.n2 = {3, 0};
    Quadruplet q2;
    q2.s1 = {1, 4};
    q2.s2 = {2, 4};
    q2.n1 = {3, 4};
    q2.n2 = {4, 5};
    RankingBatch b = tiny_batch({q, q2}, {0.5, 0.9}, {{{0, 1}, {1, 2}}, {{2, 3}, {5, 5}}});
    // Distinct random depths keep |d0-d1| away from the kink at zero.
    CHECK(grad_check([&] { return total_ranking_loss(depth, mask, b); }, {depth}) < 1e-4);
}

TEST_CASE("ranking loss is non-negative on random inputs") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor depth = Tensor::uniform({1, 1, 8, 8}, rng, 0.5, 20.0);
        Tensor mask({8, 8});
        for (std::int64_t i = 0; i < mask.size(); ++i) mask[i] = (rng() % 2) ? 1.0 : 0.0;
        std::vector<Quadruplet> quads;
        std::vector<double> gamma;
        std::vector<PointPair> pairs;
        auto rp = [&]() { return PixCoord{static_cast<int>(rng() % 8), static_cast<int>(rng() % 8)}; };
        for (int j = 0; j < 3; ++j) {
            Quadruplet q{rp(), rp(), rp(), rp(), {}, {}};
            quads.push_back(q);
            gamma.push_back(uncertainty_weight(0.4, 0.6));
        }
        for (int p = 0; p < 5; ++p) pairs.push_back({rp(), rp()});
        RankingBatch b = tiny_batch(quads, gamma, pairs);
        CHECK(total_ranking_loss(make_const(depth), mask, b)->val[0] >= 0.0);
    }
}

TEST_CASE("descending the ranking loss sharpens borders and flattens regions") {
    // Two-region depth map with a weak initial edge (2 m vs 2.35 m) plus
    // noise; the mask border lies between x=3 and x=4.
    std::mt19937_64 rng(19);
    Tensor depth({1, 1, 8, 8});
    Tensor mask({8, 8});
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            const bool right = x >= 4;
            mask.at(y, x) = right ? 1.0 : 0.0;
            depth.at(0, 0, y, x) =
                (right ? 2.3 : 2.0) + std::uniform_real_distribution<double>(-0.25, 0.25)(rng);
        }

    std::vector<Quadruplet> quads;
    std::vector<double> gamma;
    for (int y = 0; y < 8; ++y) {
        Quadruplet q;
        q.s1 = {4, y};
        q.s2 = {6, y};
        q.n1 = {3, y};
        q.n2 = {1, y};
        quads.push_back(q);
        gamma.push_back(1.0);
    }
    // Dense in-region coupling: all horizontal and vertical unit-offset pairs
    // inside each half.
    std::vector<PointPair> pairs;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            const int half = x / 4;
            if ((x + 1) / 4 == half && x + 1 < 8) pairs.push_back({{x, y}, {x + 1, y}});
            if (y + 1 < 8) pairs.push_back({{x, y}, {x, y + 1}});
        }
    RankingBatch b = tiny_batch(quads, gamma, pairs);

    auto cross_gap = [&](const Tensor& d) {
        double acc = 0;
        for (int y = 0; y < 8; ++y) acc += std::abs(d.at(0, 0, y, 4) - d.at(0, 0, y, 3));
        return acc / 8.0;
    };
    auto region_var = [&](const Tensor& d) {
        double acc = 0;
        for (int half = 0; half < 2; ++half) {
            double mean = 0;
            for (int y = 0; y < 8; ++y)
                for (int x = half * 4; x < half * 4 + 4; ++x) mean += d.at(0, 0, y, x);
            mean /= 32.0;
            for (int y = 0; y < 8; ++y)
                for (int x = half * 4; x < half * 4 + 4; ++x) {
                    const double v = d.at(0, 0, y, x) - mean;
                    acc += v * v;
                }
        }
        return acc / 64.0;
    };

    Var dvar = make_param(depth);
    const double gap0 = cross_gap(dvar->val);
    const double var0 = region_var(dvar->val);
    for (int it = 0; it < 100; ++it) {
        Var loss = total_ranking_loss(dvar, mask, b);
        backward(loss);
        for (std::int64_t i = 0; i < dvar->val.size(); ++i) dvar->val[i] -= 0.1 * dvar->grad[i];
        dvar->grad = Tensor();
    }
    CHECK(cross_gap(dvar->val) > gap0);
    CHECK(region_var(dvar->val) < var0);
}
