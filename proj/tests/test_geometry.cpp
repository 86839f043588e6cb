#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "semdepth/geometry.hpp"
#include "test_support.hpp"

using namespace semdepth;

TEST_CASE("se3_exp identity and half turn") {
    const Pose id = se3_exp({0, 0, 0}, {0, 0, 0});
    CHECK((id.rotation - Eigen::Matrix3d::Identity()).norm() == doctest::Approx(0.0));
    CHECK(id.translation.norm() == 0.0);

    const Pose half = se3_exp({M_PI, 0, 0}, {0, 0, 0});
    Eigen::Matrix3d expected;
    expected << 1, 0, 0, 0, -1, 0, 0, 0, -1;
    CHECK((half.rotation - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("se3_exp matches an independent Rodrigues evaluation") {
    const Eigen::Vector3d w(0.1, 0.2, 0.3), t(1, 2, 3);
    const Pose p = se3_exp(w, t);
    // Rodrigues formula evaluated directly: R = cos(th) I + sin(th) K + (1-cos th) aa^T.
    const double th = w.norm();
    const Eigen::Vector3d a = w / th;
    Eigen::Matrix3d k;
    k << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
    const Eigen::Matrix3d r_ref = std::cos(th) * Eigen::Matrix3d::Identity() +
                                  std::sin(th) * k + (1 - std::cos(th)) * (a * a.transpose());
    CHECK((p.rotation - r_ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((p.rotation.transpose() * p.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-9);
    CHECK(p.translation == t);
    CHECK_THROWS(se3_exp({std::nan(""), 0, 0}, {0, 0, 0}));
}

TEST_CASE("se3_exp output satisfies rotation invariants on random inputs") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const Pose p = se3_exp({dist(rng), dist(rng), dist(rng)}, {dist(rng), dist(rng), dist(rng)});
        CHECK_NOTHROW(p.validate(1e-6));
    }
}

TEST_CASE("backproject elementary cases") {
    Intrinsics k{10.0, 10.0, 2.0, 1.5, 5, 4};
    DepthMap ones{Tensor({4, 5}, 1.0)};
    Tensor pts = backproject(ones, k);
    // Principal-point pixel maps to (0,0,1). cx=2, cy=1.5 -> pixel (2, y) has x=0.
    CHECK(pts.at(0, 1, 2) == doctest::Approx(0.0));
    CHECK(pts.at(2, 1, 2) == doctest::Approx(1.0));

    // depth 2 at pixel (cx+fx, cy) -> (2, 0, 2); needs a wide image.
    Intrinsics k2{3.0, 3.0, 1.0, 1.0, 5, 3};
    DepthMap twos{Tensor({3, 5}, 2.0)};
    Tensor pts2 = backproject(twos, k2);
    CHECK(pts2.at(0, 1, 4) == doctest::Approx(2.0));  // x=cx+fx=4
    CHECK(pts2.at(1, 1, 4) == doctest::Approx(0.0));
    CHECK(pts2.at(2, 1, 4) == doctest::Approx(2.0));

    DepthMap bad{Tensor({2, 2}, 0.0)};
    CHECK_THROWS(backproject(bad, k2));
}

TEST_CASE("project inverts backproject under the identity pose") {
    Intrinsics k{8.0, 7.0, 1.7, 1.3, 4, 4};
    std::mt19937_64 rng(11);
    Tensor depth({4, 4});
    for (std::int64_t i = 0; i < depth.size(); ++i)
        depth[i] = std::uniform_real_distribution<double>(0.5, 9.0)(rng);
    Tensor grid = project(backproject(DepthMap{depth}, k), k, Pose{});
    Tensor id = identity_grid(4, 4);
    for (std::int64_t i = 0; i < grid.size(); ++i)
        CHECK(grid[i] == doctest::Approx(id[i]).epsilon(1e-9));
}

TEST_CASE("project under pure forward translation moves pixels toward the principal point") {
    Intrinsics k{10.0, 10.0, 2.0, 2.0, 5, 5};
    DepthMap ones{Tensor({5, 5}, 1.0)};
    Pose fwd;
    fwd.translation = Eigen::Vector3d(0, 0, 1);
    Tensor grid = project(backproject(ones, k), k, fwd);
    // Closed form: point (u,v) at depth 1 -> z=2, so u' = cx + (u-cx)/2.
    CHECK(grid.at(0, 0, 0) == doctest::Approx(2.0 + (0.0 - 2.0) / 2.0));
    CHECK(grid.at(1, 0, 0) == doctest::Approx(2.0 + (0.0 - 2.0) / 2.0));
    CHECK(grid.at(0, 4, 4) == doctest::Approx(2.0 + (4.0 - 2.0) / 2.0));
    CHECK(grid.at(0, 2, 2) == doctest::Approx(2.0));  // center stays

    // A point that lands at z=1e-9 is projected with z clamped to 1e-3.
    Tensor pt({3, 1, 1});
    pt.at(0, 0, 0) = 0.5;
    pt.at(1, 0, 0) = 0.0;
    pt.at(2, 0, 0) = 1e-9;
    Tensor g2 = project(pt, k, Pose{});
    CHECK(g2.at(0, 0, 0) == doctest::Approx(10.0 * 0.5 / 1e-3 + 2.0));
}

TEST_CASE("warp_bilinear identity and constant-shift behavior") {
    std::mt19937_64 rng(13);
    Tensor src = Tensor::uniform({3, 4, 6}, rng);
    WarpResult r = warp_bilinear(src, identity_grid(4, 6));
    CHECK(r.mask.min() == 1.0);
    for (std::int64_t i = 0; i < src.size(); ++i) CHECK(r.image[i] == doctest::Approx(src[i]));

    // Constant image, half-pixel shift: values unchanged where valid.
    Tensor flat = Tensor::full({1, 4, 6}, 0.7);
    Tensor grid = identity_grid(4, 6);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x) grid.at(0, y, x) += 0.5;
    WarpResult r2 = warp_bilinear(flat, grid);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x)
            if (r2.mask.at(y, x) != 0.0) CHECK(r2.image.at(0, y, x) == doctest::Approx(0.7));
    CHECK(r2.mask.at(0, 5) == 0.0);  // shifted outside
}

TEST_CASE("round trip: backproject->project grid equals the identity grid") {
    Intrinsics k{100.0, 90.0, 31.5, 15.5, 64, 32};
    std::mt19937_64 rng(17);
    Tensor depth({32, 64});
    for (std::int64_t i = 0; i < depth.size(); ++i)
        depth[i] = std::uniform_real_distribution<double>(0.2, 80.0)(rng);
    Tensor grid = project(backproject(DepthMap{depth}, k), k, Pose{});
    Tensor id = identity_grid(32, 64);
    double max_err = 0;
    for (std::int64_t i = 0; i < grid.size(); ++i) max_err = std::max(max_err, std::abs(grid[i] - id[i]));
    CHECK(max_err < 1e-6);
}

TEST_CASE("disp_to_depth endpoints, formula value and monotonicity") {
    Tensor s0 = Tensor::full({1, 1}, 0.0);
    Tensor s1 = Tensor::full({1, 1}, 1.0);
    CHECK(disp_to_depth(s0, 0.1, 100.0).values[0] == doctest::Approx(100.0));
    CHECK(disp_to_depth(s1, 0.1, 100.0).values[0] == doctest::Approx(0.1));

    // Mid value from the formula itself: 1/(1/100 + 0.5*(1/0.1 - 1/100)).
    Tensor smid = Tensor::full({1, 1}, 0.5);
    const double expect = 1.0 / (0.01 + 0.5 * (10.0 - 0.01));
    CHECK(disp_to_depth(smid, 0.1, 100.0).values[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(expect == doctest::Approx(0.1998001998).epsilon(1e-9));

    CHECK_THROWS(disp_to_depth(s0, 100.0, 0.1));
    CHECK_THROWS(disp_to_depth(s0, 5.0, 5.0));

    // Strictly decreasing in s.
    double prev = 1e30;
    for (int i = 0; i <= 20; ++i) {
        Tensor s = Tensor::full({1, 1}, i / 20.0);
        const double d = disp_to_depth(s, 0.1, 100.0).values[0];
        CHECK(d < prev);
        prev = d;
    }
}

TEST_CASE("intrinsics validation and file round trip") {
    Intrinsics k{368.6, 368.6, 96.0, 32.0, 192, 64};
    CHECK_NOTHROW(k.validate());
    CHECK_THROWS(Intrinsics{-1, 1, 0, 0, 4, 4}.validate());
    CHECK_THROWS(Intrinsics{10, 10, 5, 1, 4, 4}.validate());  // cx >= width

    const auto file = std::filesystem::temp_directory_path() / "semdepth_test_intrinsics.txt";
    save_intrinsics(k, file);
    const Intrinsics back = load_intrinsics(file);
    CHECK(back.fx == k.fx);
    CHECK(back.cy == k.cy);
    CHECK(back.width == k.width);
    std::filesystem::remove(file);
}
