#include <doctest.h>

#include <cmath>

#include "semdepth/losses.hpp"
#include "test_support.hpp"

using namespace semdepth;
using semdepth::ops::mean_all;
using semdepth::testing::grad_check;
using semdepth::testing::random_tensor;

TEST_CASE("ssim is 1 for identical images and symmetric") {
    Var a = make_const(random_tensor({1, 3, 6, 8}, 1));
    Var same = ssim(a, a);
    for (std::int64_t i = 0; i < same->val.size(); ++i)
        CHECK(same->val[i] == doctest::Approx(1.0).epsilon(1e-9));

    Var b = make_const(random_tensor({1, 3, 6, 8}, 2));
    Var ab = ssim(a, b);
    Var ba = ssim(b, a);
    for (std::int64_t i = 0; i < ab->val.size(); ++i)
        CHECK(ab->val[i] == doctest::Approx(ba->val[i]).epsilon(1e-12));

    CHECK_THROWS(ssim(a, make_const(Tensor({1, 3, 5, 8}))));
}

TEST_CASE("ssim of crossed constants follows the closed form") {
    PhotometricConfig cfg;
    Var zeros = make_const(Tensor({1, 1, 5, 5}, 0.0));
    Var ones = make_const(Tensor({1, 1, 5, 5}, 1.0));
    // mu_a=0, mu_b=1, all (co)variances 0:
    // ssim = (2*0*1+c1)(0+c2) / ((0+1+c1)(0+c2)) = c1 / (1+c1).
    const double expect = cfg.c1 / (1.0 + cfg.c1);
    Var m = ssim(zeros, ones, cfg);
    for (std::int64_t i = 0; i < m->val.size(); ++i)
        CHECK(m->val[i] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("photometric_error basics") {
    Var t = make_const(random_tensor({1, 3, 6, 8}, 3));
    Var zero_err = photometric_error(t, t);
    CHECK(zero_err->val.max() == doctest::Approx(0.0).epsilon(1e-12));

    // Pure L1 at alpha=0 with a constant offset of 0.2.
    PhotometricConfig l1_cfg;
    l1_cfg.alpha = 0.0;
    Var flat = make_const(Tensor({1, 3, 4, 4}, 0.5));
    Var shifted = make_const(Tensor({1, 3, 4, 4}, 0.3));
    Var e = photometric_error(flat, shifted, l1_cfg);
    for (std::int64_t i = 0; i < e->val.size(); ++i)
        CHECK(e->val[i] == doctest::Approx(0.2).epsilon(1e-12));

    // alpha=1 on crossed constants matches (1-SSIM)/2 from the closed form.
    PhotometricConfig ssim_cfg;
    ssim_cfg.alpha = 1.0;
    Var zeros = make_const(Tensor({1, 1, 5, 5}, 0.0));
    Var ones = make_const(Tensor({1, 1, 5, 5}, 1.0));
    const double ssim_expect = ssim_cfg.c1 / (1.0 + ssim_cfg.c1);
    Var e2 = photometric_error(zeros, ones, ssim_cfg);
    for (std::int64_t i = 0; i < e2->val.size(); ++i)
        CHECK(e2->val[i] == doctest::Approx(0.5 * (1.0 - ssim_expect)).epsilon(1e-12));

    // Non-negativity on random inputs.
    for (int trial = 0; trial < 5; ++trial) {
        Var x = make_const(random_tensor({1, 3, 6, 7}, 100 + trial));
        Var y = make_const(random_tensor({1, 3, 6, 7}, 200 + trial));
        CHECK(photometric_error(x, y)->val.min() >= -1e-12);
    }
}

TEST_CASE("min_reprojection_loss selects the best source per pixel") {
    Var target = make_const(random_tensor({1, 3, 5, 6}, 4));
    CHECK_THROWS(min_reprojection_loss(target, {}, {}));

    // A perfect source alone, and alongside garbage, gives zero.
    CHECK(min_reprojection_loss(target, {target}, {})->val[0] == doctest::Approx(0.0).epsilon(1e-12));
    Var garbage = make_const(random_tensor({1, 3, 5, 6}, 5));
    CHECK(min_reprojection_loss(target, {target, garbage}, {})->val[0] ==
          doctest::Approx(0.0).epsilon(1e-12));

    // Two imperfect sources with masks match a per-pixel brute-force pool.
    Var s1 = make_const(random_tensor({1, 3, 5, 6}, 6));
    Var s2 = make_const(random_tensor({1, 3, 5, 6}, 7));
    Tensor m1({1, 1, 5, 6}), m2({1, 1, 5, 6});
    std::mt19937_64 rng(8);
    for (std::int64_t i = 0; i < m1.size(); ++i) {
        m1[i] = (rng() % 4) != 0 ? 1.0 : 0.0;
        m2[i] = (rng() % 4) != 0 ? 1.0 : 0.0;
    }
    const Tensor e1 = photometric_error(target, s1)->val;
    const Tensor e2 = photometric_error(target, s2)->val;
    double acc = 0.0;
    std::int64_t count = 0;
    for (std::int64_t i = 0; i < e1.size(); ++i) {
        if (m1[i] == 0.0 && m2[i] == 0.0) continue;
        double best = 1e300;
        if (m1[i] != 0.0) best = std::min(best, e1[i]);
        if (m2[i] != 0.0) best = std::min(best, e2[i]);
        acc += best;
        ++count;
    }
    const double expect = acc / static_cast<double>(count);
    CHECK(min_reprojection_loss(target, {s1, s2}, {m1, m2})->val[0] ==
          doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("smoothness_loss on constant and ramp disparity") {
    Var flat_img = make_const(Tensor({1, 3, 4, 4}, 0.5));
    Var const_disp = make_const(Tensor({1, 1, 4, 4}, 0.37));
    CHECK(smoothness_loss(const_disp, flat_img)->val[0] == doctest::Approx(0.0).epsilon(1e-12));

    // Linear ramp along x on a constant image: mean |slope| / mean(disp).
    Tensor ramp({1, 1, 4, 4});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) ramp.at(0, 0, y, x) = static_cast<double>(x);
    Var disp = make_const(ramp);
    CHECK(smoothness_loss(disp, flat_img)->val[0] == doctest::Approx(1.0 / 1.5).epsilon(1e-6));

    // Scale invariance through the mean normalization.
    Tensor big = ramp;
    big.scale_(10.0);
    const double a = smoothness_loss(disp, flat_img)->val[0];
    const double b = smoothness_loss(make_const(big), flat_img)->val[0];
    CHECK(std::abs(a - b) < 1e-6);
}

TEST_CASE("bce_loss values") {
    Tensor label({2, 2}, {1, 0, 1, 0});
    Var perfect = make_const(Tensor({2, 2}, {1, 0, 1, 0}));
    CHECK(bce_loss(perfect, label)->val[0] < 1e-6);

    Var half = make_const(Tensor({2, 2}, 0.5));
    CHECK(bce_loss(half, label)->val[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor ones_label({2, 2}, 1.0);
    Var p09 = make_const(Tensor({2, 2}, 0.9));
    CHECK(bce_loss(p09, ones_label)->val[0] == doctest::Approx(-std::log(0.9)).epsilon(1e-12));

    Tensor bad({2, 2}, 0.5);
    CHECK_THROWS(bce_loss(half, bad));
}

TEST_CASE("loss gradients match finite differences") {
    // Photometric at both alpha extremes.
    for (double alpha : {0.0, 1.0, 0.85}) {
        PhotometricConfig cfg;
        cfg.alpha = alpha;
        Var t = make_param(random_tensor({1, 3, 6, 6}, 20, 0.1, 0.9));
        Var s = make_param(random_tensor({1, 3, 6, 6}, 21, 0.1, 0.9));
        CHECK(grad_check([&] { return mean_all(photometric_error(t, s, cfg)); }, {t, s}) < 1e-4);
    }
    // Minimum over two sources with masks.
    {
        Var t = make_param(random_tensor({1, 3, 5, 5}, 22, 0.1, 0.9));
        Var s1 = make_param(random_tensor({1, 3, 5, 5}, 23, 0.1, 0.9));
        Var s2 = make_param(random_tensor({1, 3, 5, 5}, 24, 0.1, 0.9));
        Tensor m = Tensor::full({1, 1, 5, 5}, 1.0);
        m[3] = 0.0;
        CHECK(grad_check([&] { return min_reprojection_loss(t, {s1, s2}, {m, m}); }, {t, s1, s2}) <
              1e-4);
    }
    // Smoothness with gradients into both disparity and image.
    {
        Var disp = make_param(random_tensor({1, 1, 6, 6}, 25, 0.2, 0.8));
        Var img = make_param(random_tensor({1, 3, 6, 6}, 26, 0.1, 0.9));
        CHECK(grad_check([&] { return smoothness_loss(disp, img); }, {disp, img}) < 1e-4);
    }
    // Binary cross entropy.
    {
        Var p = make_param(random_tensor({4, 4}, 27, 0.05, 0.95));
        Tensor label({4, 4});
        std::mt19937_64 rng(28);
        for (std::int64_t i = 0; i < label.size(); ++i) label[i] = (rng() % 2) ? 1.0 : 0.0;
        CHECK(grad_check([&] { return bce_loss(p, label); }, {p}) < 1e-4);
    }
}
