#include "semdepth/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace semdepth {

namespace {

void check_binary_mask(const Tensor& mask) {
    if (mask.rank() != 2) throw std::invalid_argument("sampler: (H,W) binary mask required");
    for (std::int64_t i = 0; i < mask.size(); ++i)
        if (mask[i] != 0.0 && mask[i] != 1.0)
            throw std::invalid_argument("sampler: mask values must be exactly 0 or 1");
}

inline bool in_bounds(PixCoord p, int h, int w) {
    return p.x >= 0 && p.x < w && p.y >= 0 && p.y < h;
}

inline int clamp_idx(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// 3x3 Sobel response at p with replicated borders.
void sobel_at(const Tensor& img, int px, int py, double& gx, double& gy) {
    const int h = img.dim(0), w = img.dim(1);
    auto v = [&](int dy, int dx) { return img.at(clamp_idx(py + dy, h), clamp_idx(px + dx, w)); };
    gx = (v(-1, 1) + 2 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2 * v(0, -1) + v(1, -1));
    gy = (v(1, -1) + 2 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2 * v(-1, 0) + v(-1, 1));
}

// Round half away from zero, per-axis.
inline PixCoord round_point(double x, double y) {
    return {static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))};
}

inline int label_at(const Tensor& mask, PixCoord p) { return mask.at(p.y, p.x) != 0.0 ? 1 : 0; }

}  // namespace

void SamplerConfig::validate() const {
    if (r < 0) throw std::invalid_argument("sampler config: r must be >= 0");
    if (omega1 < 0) throw std::invalid_argument("sampler config: omega1 must be >= 0");
    if (!(omega2_min > 0) || omega2_min > omega2_max)
        throw std::invalid_argument("sampler config: require 0 < omega2_min <= omega2_max");
    if (k_prime <= 0) throw std::invalid_argument("sampler config: k_prime must be positive");
    if (epsilon < 1) throw std::invalid_argument("sampler config: epsilon must be >= 1");
    if (max_edge_points <= 0) throw std::invalid_argument("sampler config: max_edge_points must be positive");
}

std::vector<PixCoord> extract_edge_points(const Tensor& mask) {
    check_binary_mask(mask);
    const int h = mask.dim(0), w = mask.dim(1);
    std::vector<PixCoord> points;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = mask.at(y, x);
            const bool edge = (x > 0 && mask.at(y, x - 1) != v) || (x + 1 < w && mask.at(y, x + 1) != v) ||
                              (y > 0 && mask.at(y - 1, x) != v) || (y + 1 < h && mask.at(y + 1, x) != v);
            if (edge) points.push_back({x, y});
        }
    return points;
}

std::optional<Eigen::Vector2d> edge_normal(const Tensor& mask, PixCoord p) {
    check_binary_mask(mask);
    if (!in_bounds(p, mask.dim(0), mask.dim(1)))
        throw std::out_of_range("edge_normal: point outside image");
    double gx, gy;
    sobel_at(mask, p.x, p.y, gx, gy);
    if (gx == 0.0 && gy == 0.0) return std::nullopt;
    Eigen::Vector2d n(gx, gy);
    n.normalize();
    // Canonical orientation: toward +x, then +y.
    if (n.x() < 0 || (n.x() == 0 && n.y() < 0)) n = -n;
    return n;
}

int find_max_gradient_point(const Tensor& image_grad, PixCoord p_e, const Eigen::Vector2d& n, int r) {
    if (image_grad.rank() != 2) throw std::invalid_argument("find_max_gradient_point: (H,W) gradient required");
    if (r < 0) throw std::invalid_argument("find_max_gradient_point: r must be >= 0");
    const int h = image_grad.dim(0), w = image_grad.dim(1);
    bool found = false;
    int best_t = 0;
    double best_g = 0.0;
    // Visit t in the order 0, -1, +1, -2, +2, ... with strict improvement, so
    // ties resolve to the smallest |t| and then the negative side.
    for (int mag = 0; mag <= r; ++mag) {
        for (int sgn : {-1, +1}) {
            if (mag == 0 && sgn > 0) continue;
            const int t = sgn * mag;
            const PixCoord p = round_point(p_e.x + t * n.x(), p_e.y + t * n.y());
            if (!in_bounds(p, h, w)) continue;
            const double g = image_grad.at(p.y, p.x);
            if (!found || g > best_g) {
                found = true;
                best_g = g;
                best_t = t;
            }
        }
    }
    if (!found) throw std::runtime_error("find_max_gradient_point: all candidate positions out of bounds");
    return best_t;
}

std::optional<Quadruplet> sample_quadruplet(const Tensor& mask, const Tensor& image_grad,
                                            PixCoord p_e, const SamplerConfig& cfg,
                                            std::mt19937_64& rng) {
    cfg.validate();
    const auto n = edge_normal(mask, p_e);
    if (!n) return std::nullopt;
    const int h = mask.dim(0), w = mask.dim(1);
    const int t_g = find_max_gradient_point(image_grad, p_e, *n, cfg.r);
    const double t_low = std::min(0, t_g) - cfg.omega1;
    const double t_high = std::max(0, t_g) + cfg.omega1;

    Quadruplet q;
    q.edge_point = p_e;
    q.gradient_point = round_point(p_e.x + t_g * n->x(), p_e.y + t_g * n->y());
    q.s1 = round_point(p_e.x + t_low * n->x(), p_e.y + t_low * n->y());
    q.n1 = round_point(p_e.x + t_high * n->x(), p_e.y + t_high * n->y());

    std::uniform_real_distribution<double> omega2(cfg.omega2_min, cfg.omega2_max);
    const double u_s = omega2(rng);  // S side drawn first
    const double u_n = omega2(rng);
    q.s2 = round_point(q.s1.x - u_s * n->x(), q.s1.y - u_s * n->y());
    q.n2 = round_point(q.n1.x + u_n * n->x(), q.n1.y + u_n * n->y());

    if (!in_bounds(q.s1, h, w) || !in_bounds(q.s2, h, w) || !in_bounds(q.n1, h, w) ||
        !in_bounds(q.n2, h, w))
        return std::nullopt;
    // Each side pair must stay inside one region; outer points that cross
    // another border make the quadruplet ill-formed.
    if (label_at(mask, q.s1) != label_at(mask, q.s2) || label_at(mask, q.n1) != label_at(mask, q.n2))
        return std::nullopt;

    // Pure naming: the S side carries label 1 when the two sides disagree.
    if (label_at(mask, q.s1) == 0 && label_at(mask, q.n1) == 1) {
        std::swap(q.s1, q.n1);
        std::swap(q.s2, q.n2);
    }
    return q;
}

bool pair_in_region(const Tensor& mask, PixCoord p1, PixCoord p2, const SamplerConfig& cfg) {
    const int h = mask.dim(0), w = mask.dim(1);
    if (!in_bounds(p1, h, w) || !in_bounds(p2, h, w)) return false;
    const int l1 = label_at(mask, p1), l2 = label_at(mask, p2);
    if (l1 != l2) return false;
    return !cfg.foreground_pairs_only || l1 == 1;
}

std::vector<PointPair> sample_random_pairs(const Tensor& mask, const SamplerConfig& cfg,
                                           std::mt19937_64& rng) {
    cfg.validate();
    check_binary_mask(mask);
    const int h = mask.dim(0), w = mask.dim(1);
    std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
    std::uniform_int_distribution<int> uoff(-cfg.epsilon, cfg.epsilon);
    std::vector<PointPair> pairs;
    for (int i = 0; i < cfg.k_prime; ++i) {
        const PixCoord p1{ux(rng), uy(rng)};
        const int dx = uoff(rng), dy = uoff(rng);
        const PixCoord p2{p1.x + dx, p1.y + dy};
        if (pair_in_region(mask, p1, p2, cfg)) pairs.push_back({p1, p2});
    }
    return pairs;
}

double inlier_rate(const std::vector<PointPair>& pairs, const Tensor& gt_mask) {
    if (pairs.empty()) throw std::invalid_argument("inlier_rate: empty pair list");
    check_binary_mask(gt_mask);
    const int h = gt_mask.dim(0), w = gt_mask.dim(1);
    std::int64_t inliers = 0;
    for (const auto& p : pairs) {
        if (!in_bounds(p.p1, h, w) || !in_bounds(p.p2, h, w))
            throw std::out_of_range("inlier_rate: pair outside image");
        if (label_at(gt_mask, p.p1) != label_at(gt_mask, p.p2)) ++inliers;
    }
    return static_cast<double>(inliers) / static_cast<double>(pairs.size());
}

SampleSet sample_image(const Tensor& mask, const Tensor& image_grad, const SamplerConfig& cfg,
                       std::mt19937_64& rng) {
    cfg.validate();
    SampleSet out;
    std::vector<PixCoord> edges = extract_edge_points(mask);
    out.edge_points_total = static_cast<int>(edges.size());
    if (out.edge_points_total > cfg.max_edge_points) {
        // Evenly spaced subsample keeps determinism independent of rng use.
        std::vector<PixCoord> kept(static_cast<size_t>(cfg.max_edge_points));
        for (int i = 0; i < cfg.max_edge_points; ++i)
            kept[static_cast<size_t>(i)] =
                edges[static_cast<size_t>(static_cast<std::int64_t>(i) * edges.size() / cfg.max_edge_points)];
        edges.swap(kept);
    }
    out.edge_points_used = static_cast<int>(edges.size());
    for (const PixCoord& p : edges) {
        if (auto q = sample_quadruplet(mask, image_grad, p, cfg, rng)) out.quadruplets.push_back(*q);
    }
    out.random_pairs = sample_random_pairs(mask, cfg, rng);
    return out;
}

Tensor grayscale(const Tensor& rgb) {
    if (rgb.rank() != 3 || rgb.dim(0) != 3) throw std::invalid_argument("grayscale: (3,H,W) input required");
    const int h = rgb.dim(1), w = rgb.dim(2);
    Tensor g({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            g.at(y, x) = 0.299 * rgb.at(0, y, x) + 0.587 * rgb.at(1, y, x) + 0.114 * rgb.at(2, y, x);
    return g;
}

Tensor sobel_magnitude(const Tensor& gray) {
    if (gray.rank() != 2) throw std::invalid_argument("sobel_magnitude: (H,W) input required");
    const int h = gray.dim(0), w = gray.dim(1);
    Tensor mag({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double gx, gy;
            sobel_at(gray, x, y, gx, gy);
            mag.at(y, x) = std::hypot(gx, gy);
        }
    return mag;
}

}  // namespace semdepth
