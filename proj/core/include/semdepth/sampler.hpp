#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <vector>

#include "semdepth/tensor.hpp"

namespace semdepth {

struct PixCoord {
    int x = 0, y = 0;
    bool operator==(const PixCoord&) const = default;
};

struct SamplerConfig {
    int r = 5;                  // max-gradient search half-range, pixels
    double omega1 = 1.0;        // clamp margin, pixels
    double omega2_min = 2.5;    // second-point offset range, pixels
    double omega2_max = 10.0;
    int k_prime = 6000;         // random pair draw count
    int epsilon = 3;            // random pair max per-axis offset, pixels
    int max_edge_points = 4096; // uniform subsample cap per image
    bool foreground_pairs_only = false;  // restrict the random pair set to label-1 regions
    std::uint64_t seed = 0;

    void validate() const;
};

/// Four co-linear pixels straddling a semantic border. s1/s2 lie on one
/// side, n1/n2 on the other; s1 carries mask label 1 when possible.
struct Quadruplet {
    PixCoord s1, s2, n1, n2;
    PixCoord edge_point;      // the label-edge pixel the quadruplet was grown from
    PixCoord gradient_point;  // max image-gradient pixel found along the normal
};

struct PointPair {
    PixCoord p1, p2;
};

struct SampleSet {
    std::vector<Quadruplet> quadruplets;
    std::vector<PointPair> random_pairs;
    int edge_points_total = 0;   // before the subsample cap
    int edge_points_used = 0;
};

/// Pixels of a binary (H,W) mask whose 4-neighborhood contains the other
/// label, in row-major order.
std::vector<PixCoord> extract_edge_points(const Tensor& mask);

/// Unit border normal from a 3x3 Sobel response on the binary mask,
/// canonically oriented toward +x (then +y). Empty when the response is zero.
std::optional<Eigen::Vector2d> edge_normal(const Tensor& mask, PixCoord p);

/// Signed offset t in [-r, r] maximizing image_grad at round(p_e + t*n).
/// Ties prefer the smallest |t|, then the negative side. Throws when every
/// candidate position falls outside the image.
int find_max_gradient_point(const Tensor& image_grad, PixCoord p_e, const Eigen::Vector2d& n, int r);

/// Grows one quadruplet from an edge point: the cross-border pair clamps
/// both the edge point and the max-gradient point with margin omega1; the
/// outer points sit a further uniform [omega2_min, omega2_max] outward.
/// Empty when the normal is undefined or any point leaves the image.
std::optional<Quadruplet> sample_quadruplet(const Tensor& mask, const Tensor& image_grad,
                                            PixCoord p_e, const SamplerConfig& cfg,
                                            std::mt19937_64& rng);

/// True when both points are in bounds and share the same binary label
/// (and, with foreground_pairs_only, that label is 1).
bool pair_in_region(const Tensor& mask, PixCoord p1, PixCoord p2, const SamplerConfig& cfg);

/// Draws k_prime candidate pairs (first point uniform, offsets uniform in
/// [-epsilon, epsilon] per axis) and keeps those passing pair_in_region.
std::vector<PointPair> sample_random_pairs(const Tensor& mask, const SamplerConfig& cfg,
                                           std::mt19937_64& rng);

/// Fraction of pairs whose endpoints carry different gt labels. Throws on
/// an empty list.
double inlier_rate(const std::vector<PointPair>& pairs, const Tensor& gt_mask);

/// Full per-image sampling: quadruplets from every edge point (evenly
/// subsampled past the cap) plus the random in-region pair set.
SampleSet sample_image(const Tensor& mask, const Tensor& image_grad, const SamplerConfig& cfg,
                       std::mt19937_64& rng);

/// Luma conversion 0.299 R + 0.587 G + 0.114 B of a (3,H,W) image.
Tensor grayscale(const Tensor& rgb);

/// Sobel gradient magnitude with replicated borders, (H,W) input and output.
Tensor sobel_magnitude(const Tensor& gray);

}  // namespace semdepth
