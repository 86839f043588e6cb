#include <doctest.h>

#include <cmath>
#include <random>

#include "semdepth/data.hpp"
#include "semdepth/sampler.hpp"

using namespace semdepth;

namespace {

Tensor half_mask(int h, int w, int split_col) {  // 0 left of split, 1 from split on
    Tensor m({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.at(y, x) = x >= split_col ? 1.0 : 0.0;
    return m;
}

Tensor random_mask(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor m({h, w});
    for (std::int64_t i = 0; i < m.size(); ++i) m[i] = (rng() % 2) ? 1.0 : 0.0;
    return m;
}

}  // namespace

TEST_CASE("extract_edge_points on trivial and random masks") {
    CHECK(extract_edge_points(Tensor({8, 8}, 0.0)).empty());

    // Left-half 0 / right-half 1: the two columns adjoining the split.
    Tensor m = half_mask(8, 8, 4);
    auto pts = extract_edge_points(m);
    CHECK(pts.size() == 16);
    for (const auto& p : pts) CHECK((p.x == 3 || p.x == 4));

    // Exhaustive 4-neighbor oracle on a random 16x16 mask.
    Tensor r = random_mask(16, 16, 3);
    auto got = extract_edge_points(r);
    std::vector<PixCoord> expect;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const double v = r.at(y, x);
            bool edge = false;
            if (x > 0 && r.at(y, x - 1) != v) edge = true;
            if (x < 15 && r.at(y, x + 1) != v) edge = true;
            if (y > 0 && r.at(y - 1, x) != v) edge = true;
            if (y < 15 && r.at(y + 1, x) != v) edge = true;
            if (edge) expect.push_back({x, y});
        }
    REQUIRE(got.size() == expect.size());
    for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == expect[i]);

    Tensor bad({4, 4}, 0.5);
    CHECK_THROWS(extract_edge_points(bad));
}

TEST_CASE("edge_normal directions") {
    // Vertical border: normal along +-x (canonically +x).
    Tensor v = half_mask(8, 8, 4);
    auto n = edge_normal(v, {4, 4});
    REQUIRE(n);
    CHECK(std::abs(n->x()) == doctest::Approx(1.0));
    CHECK(n->y() == doctest::Approx(0.0));

    // Horizontal border.
    Tensor hmask({8, 8});
    for (int y = 4; y < 8; ++y)
        for (int x = 0; x < 8; ++x) hmask.at(y, x) = 1.0;
    auto n2 = edge_normal(hmask, {4, 4});
    REQUIRE(n2);
    CHECK(n2->x() == doctest::Approx(0.0));
    CHECK(std::abs(n2->y()) == doctest::Approx(1.0));

    // 45-degree staircase: Sobel responds equally in x and y.
    Tensor stairs({8, 8});
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) stairs.at(y, x) = (x + y >= 8) ? 1.0 : 0.0;
    auto n3 = edge_normal(stairs, {4, 4});
    REQUIRE(n3);
    CHECK(std::abs(n3->x()) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
    CHECK(std::abs(n3->y()) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));

    // Interior point of a constant region has no gradient.
    CHECK_FALSE(edge_normal(Tensor({8, 8}, 1.0), {4, 4}).has_value());
}

TEST_CASE("find_max_gradient_point search and ties") {
    Tensor grad({9, 9}, 0.0);
    const Eigen::Vector2d n(1.0, 0.0);
    CHECK(find_max_gradient_point(grad, {4, 4}, n, 0) == 0);

    grad.at(4, 7) = 5.0;  // spike at t=+3
    CHECK(find_max_gradient_point(grad, {4, 4}, n, 5) == 3);

    // Random field vs exhaustive scan with the tie rule.
    std::mt19937_64 rng(9);
    Tensor rnd({9, 9});
    for (std::int64_t i = 0; i < rnd.size(); ++i)
        rnd[i] = std::uniform_real_distribution<double>(0, 1)(rng);
    for (int r = 0; r <= 4; ++r) {
        int best_t = 0;
        double best_g = -1;
        bool found = false;
        for (int mag = 0; mag <= r; ++mag)
            for (int sgn : {-1, 1}) {
                if (mag == 0 && sgn == 1) continue;
                const int t = sgn * mag;
                const int x = 4 + t;  // n = +x
                if (x < 0 || x > 8) continue;
                const double g = rnd.at(4, x);
                if (!found || g > best_g) {
                    found = true;
                    best_g = g;
                    best_t = t;
                }
            }
        CHECK(find_max_gradient_point(rnd, {4, 4}, n, r) == best_t);
    }

    CHECK_THROWS(find_max_gradient_point(grad, {-100, -100}, n, 1));
}

TEST_CASE("sample_quadruplet clamps edge and gradient points") {
    SamplerConfig cfg;
    cfg.omega1 = 1.0;
    cfg.omega2_min = 2.5;
    cfg.omega2_max = 3.0;
    std::mt19937_64 rng(11);

    // Uniform gradient: t_g = 0, so s1/n1 sit exactly 1 px either side.
    Tensor mask = half_mask(16, 32, 16);
    Tensor flat_grad({16, 32}, 0.0);
    cfg.r = 5;
    auto q = sample_quadruplet(mask, flat_grad, {16, 8}, cfg, rng);
    REQUIRE(q);
    CHECK(q->s1.y == 8);
    CHECK(q->n1.y == 8);
    CHECK(std::abs(q->s1.x - 16) == 1);
    CHECK(std::abs(q->n1.x - 16) == 1);
    CHECK(q->s1.x != q->n1.x);
    // Naming: s1 carries label 1 (x >= 16).
    CHECK(mask.at(q->s1.y, q->s1.x) == 1.0);
    CHECK(mask.at(q->n1.y, q->n1.x) == 0.0);

    // Gradient spike at t=+4 from the edge point: n1 at +5, s1 at -1.
    Tensor spike_grad({16, 32}, 0.0);
    spike_grad.at(8, 20) = 9.0;  // edge at x=16, normal +x, spike at t=+4
    auto q2 = sample_quadruplet(mask, spike_grad, {16, 8}, cfg, rng);
    REQUIRE(q2);
    CHECK(q2->gradient_point.x == 20);
    // Clamp rule: [min(0,t_g)-w1, max(0,t_g)+w1] = [-1, +5].
    const PixCoord outer_pos = mask.at(8, 21) == 1.0 ? q2->s1 : q2->n1;
    const PixCoord outer_neg = mask.at(8, 21) == 1.0 ? q2->n1 : q2->s1;
    CHECK(outer_pos.x == 21);
    CHECK(outer_neg.x == 15);

    // Corner edge point whose quadruplet would leave the image is skipped.
    Tensor corner_mask = half_mask(8, 8, 1);
    Tensor g8({8, 8}, 0.0);
    cfg.r = 0;
    auto q3 = sample_quadruplet(corner_mask, g8, {0, 0}, cfg, rng);
    CHECK_FALSE(q3.has_value());
}

TEST_CASE("sample_random_pairs keeps same-label in-bounds pairs") {
    SamplerConfig cfg;
    cfg.k_prime = 2000;
    cfg.epsilon = 3;

    // Constant mask: every in-bounds pair is kept.
    Tensor flat({16, 16}, 1.0);
    std::mt19937_64 rng(13);
    auto pairs = sample_random_pairs(flat, cfg, rng);
    std::mt19937_64 rng2(13);
    std::uniform_int_distribution<int> ux(0, 15), uy(0, 15), uo(-3, 3);
    int in_bounds = 0;
    for (int i = 0; i < cfg.k_prime; ++i) {
        const int x = ux(rng2), y = uy(rng2), dx = uo(rng2), dy = uo(rng2);
        if (x + dx >= 0 && x + dx < 16 && y + dy >= 0 && y + dy < 16) ++in_bounds;
    }
    CHECK(static_cast<int>(pairs.size()) == in_bounds);

    // 1x1 checkerboard with a forced (1,0) offset keeps nothing.
    Tensor checker({8, 8});
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) checker.at(y, x) = (x + y) % 2;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x + 1 < 8; ++x)
            CHECK_FALSE(pair_in_region(checker, {x, y}, {x + 1, y}, cfg));

    // Fixed seed: kept count equals an independent recount.
    Tensor rmask = random_mask(16, 16, 17);
    std::mt19937_64 rng3(21);
    auto kept = sample_random_pairs(rmask, cfg, rng3);
    std::mt19937_64 rng4(21);
    int recount = 0;
    for (int i = 0; i < cfg.k_prime; ++i) {
        const int x = ux(rng4), y = uy(rng4), dx = uo(rng4), dy = uo(rng4);
        const int x2 = x + dx, y2 = y + dy;
        if (x2 >= 0 && x2 < 16 && y2 >= 0 && y2 < 16 && rmask.at(y, x) == rmask.at(y2, x2)) ++recount;
    }
    CHECK(static_cast<int>(kept.size()) == recount);
    for (const auto& p : kept) CHECK(rmask.at(p.p1.y, p.p1.x) == rmask.at(p.p2.y, p.p2.x));

    // Foreground-only restriction.
    cfg.foreground_pairs_only = true;
    std::mt19937_64 rng5(23);
    for (const auto& p : sample_random_pairs(rmask, cfg, rng5))
        CHECK(rmask.at(p.p1.y, p.p1.x) == 1.0);
}

TEST_CASE("inlier_rate basics") {
    Tensor gt = half_mask(16, 32, 16);
    CHECK_THROWS(inlier_rate({}, gt));

    // Pairs from the gt mask itself with r=0 on a straight border: rate 1.
    SamplerConfig cfg;
    cfg.r = 0;
    Tensor flat_grad({16, 32}, 0.0);
    std::mt19937_64 rng(29);
    std::vector<PointPair> cross;
    for (const auto& pe : extract_edge_points(gt)) {
        if (auto q = sample_quadruplet(gt, flat_grad, pe, cfg, rng)) cross.push_back({q->s1, q->n1});
    }
    REQUIRE(!cross.empty());
    CHECK(inlier_rate(cross, gt) == doctest::Approx(1.0));
}

TEST_CASE("quadruplet invariants hold over many synthetic masks") {
    SamplerConfig cfg;
    std::mt19937_64 rng(31);
    int total = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        // Random rectangle mask plus random gradient field.
        std::mt19937_64 srng(1000 + trial);
        Tensor mask({24, 24}, 0.0);
        const int x0 = static_cast<int>(srng() % 12), y0 = static_cast<int>(srng() % 12);
        const int x1 = x0 + 4 + static_cast<int>(srng() % 8), y1 = y0 + 4 + static_cast<int>(srng() % 8);
        for (int y = y0; y <= std::min(y1, 23); ++y)
            for (int x = x0; x <= std::min(x1, 23); ++x) mask.at(y, x) = 1.0;
        Tensor grad = Tensor::uniform({24, 24}, srng);
        for (const auto& pe : extract_edge_points(mask)) {
            auto q = sample_quadruplet(mask, grad, pe, cfg, rng);
            if (!q) continue;
            ++total;
            for (const PixCoord& p : {q->s1, q->s2, q->n1, q->n2}) {
                CHECK(p.x >= 0);
                CHECK(p.x < 24);
                CHECK(p.y >= 0);
                CHECK(p.y < 24);
            }
            CHECK(mask.at(q->s1.y, q->s1.x) == mask.at(q->s2.y, q->s2.x));
            CHECK(mask.at(q->n1.y, q->n1.x) == mask.at(q->n2.y, q->n2.x));
            // Co-linearity within rounding: cross product of (s2-s1) and
            // (n2-n1) directions stays small for unit-normal lines.
            const double vx = q->n2.x - q->s2.x, vy = q->n2.y - q->s2.y;
            const double wx = q->n1.x - q->s1.x, wy = q->n1.y - q->s1.y;
            const double cross = vx * wy - vy * wx;
            const double scale = std::hypot(vx, vy) * std::hypot(wx, wy);
            if (scale > 0) CHECK(std::abs(cross) / scale < 0.35);
        }
    }
    CHECK(total > 5000);
}

TEST_CASE("sampling with a fixed seed is bit-reproducible") {
    SceneConfig scfg;
    scfg.width = 96;
    scfg.height = 64;
    scfg.noise_radius = 2;
    SceneSample scene = generate_synthetic_scene(77, scfg);
    SamplerConfig cfg;
    cfg.k_prime = 1000;
    const Tensor grad = sobel_magnitude(grayscale(scene.frames[1]));
    std::mt19937_64 r1(5), r2(5);
    SampleSet a = sample_image(scene.training_label(), grad, cfg, r1);
    SampleSet b = sample_image(scene.training_label(), grad, cfg, r2);
    REQUIRE(a.quadruplets.size() == b.quadruplets.size());
    REQUIRE(a.random_pairs.size() == b.random_pairs.size());
    for (size_t i = 0; i < a.quadruplets.size(); ++i) {
        CHECK(a.quadruplets[i].s1 == b.quadruplets[i].s1);
        CHECK(a.quadruplets[i].s2 == b.quadruplets[i].s2);
        CHECK(a.quadruplets[i].n1 == b.quadruplets[i].n1);
        CHECK(a.quadruplets[i].n2 == b.quadruplets[i].n2);
    }
    for (size_t i = 0; i < a.random_pairs.size(); ++i) {
        CHECK(a.random_pairs[i].p1 == b.random_pairs[i].p1);
        CHECK(a.random_pairs[i].p2 == b.random_pairs[i].p2);
    }
}

TEST_CASE("max-gradient snapping beats direct-adjacent sampling on noisy labels") {
    // Scaled-down version of the sampler study: noisy pseudo-labels on
    // synthetic scenes, proposed (r=5) vs direct (r=0), gt inlier rates.
    SceneConfig scfg;
    scfg.width = 128;
    scfg.height = 64;
    scfg.noise_radius = 2;
    double rate_direct = 0, rate_proposed = 0;
    int scenes = 0;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        SceneSample scene = generate_synthetic_scene(900 + seed, scfg);
        if (!scene.noisy_label) continue;
        const Tensor grad = sobel_magnitude(grayscale(scene.frames[1]));
        const Tensor& gt = scene.binary_label;
        for (int r : {0, 5}) {
            SamplerConfig cfg;
            cfg.r = r;
            cfg.k_prime = 1;  // random pairs unused here
            std::mt19937_64 rng(seed);
            SampleSet set = sample_image(*scene.noisy_label, grad, cfg, rng);
            if (set.quadruplets.empty()) continue;
            std::vector<PointPair> cross;
            for (const auto& q : set.quadruplets) cross.push_back({q.s1, q.n1});
            const double rate = inlier_rate(cross, gt);
            (r == 0 ? rate_direct : rate_proposed) += rate;
        }
        ++scenes;
    }
    REQUIRE(scenes > 0);
    rate_direct /= scenes;
    rate_proposed /= scenes;
    CHECK(rate_proposed > rate_direct);
}
