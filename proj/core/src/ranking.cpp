#include "semdepth/ranking.hpp"

#include <cmath>
#include <stdexcept>

namespace semdepth {

namespace {
constexpr double kInvE = 0.36787944117144233;  // 1/e

int mask_label(const Tensor& mask, PixCoord p) {
    if (p.y < 0 || p.y >= mask.dim(0) || p.x < 0 || p.x >= mask.dim(1))
        throw std::out_of_range("ranking: point outside mask");
    return mask.at(p.y, p.x) != 0.0 ? 1 : 0;
}
}  // namespace

void RankingBatch::validate() const {
    if (gamma.size() != quadruplets.size())
        throw std::invalid_argument("ranking batch: gamma count does not match quadruplet count");
    for (double g : gamma)
        if (!(g >= kInvE - 1e-12 && g <= 1.0 + 1e-12))
            throw std::invalid_argument("ranking batch: gamma outside [1/e, 1]");
}

int belonging_indicator(int label0, int label1) {
    if ((label0 != 0 && label0 != 1) || (label1 != 0 && label1 != 1))
        throw std::invalid_argument("belonging_indicator: labels must be 0 or 1");
    return label0 != label1 ? 1 : 0;
}

double pair_loss(double d0, double d1, int ell) {
    if (!std::isfinite(d0) || !std::isfinite(d1)) throw std::invalid_argument("pair_loss: non-finite depth");
    const double diff = d0 - d1;
    if (ell == 1) return std::log1p(std::exp(-std::abs(diff)));
    if (ell == 0) return diff * diff;
    throw std::invalid_argument("pair_loss: ell must be 0 or 1");
}

double uncertainty_weight(double s1_prob, double n1_prob) {
    const double s = std::min(std::max(s1_prob, 1e-6), 1.0);
    const double n = std::min(std::max(n1_prob, 1e-6), 1.0);
    const double ratio = std::max(s / n, n / s);
    return std::exp(-1.0 / ratio);
}

RankingBatch make_ranking_batch(SampleSet samples, const Tensor& sem_prob) {
    if (sem_prob.rank() != 2) throw std::invalid_argument("make_ranking_batch: (H,W) sem_prob required");
    RankingBatch batch;
    batch.quadruplets = std::move(samples.quadruplets);
    batch.random_pairs = std::move(samples.random_pairs);
    batch.gamma.reserve(batch.quadruplets.size());
    for (const Quadruplet& q : batch.quadruplets) {
        const double s1 = sem_prob.at(q.s1.y, q.s1.x);
        const double n1 = sem_prob.at(q.n1.y, q.n1.x);
        batch.gamma.push_back(uncertainty_weight(s1, n1));
    }
    return batch;
}

Var total_ranking_loss(const Var& value_map, const Tensor& mask, const RankingBatch& batch,
                       int batch_index) {
    batch.validate();
    const int j = batch.j_count(), k = batch.k_count();
    if (j == 0 && k == 0) return make_const(Tensor::scalar(0.0));

    std::vector<ops::PixelIndex> idx0, idx1;
    std::vector<double> weight, ell;
    idx0.reserve(static_cast<size_t>(3 * j + k));
    idx1.reserve(idx0.capacity());
    auto push = [&](PixCoord a, PixCoord b, double w) {
        idx0.push_back({batch_index, a.y, a.x});
        idx1.push_back({batch_index, b.y, b.x});
        weight.push_back(w);
        ell.push_back(static_cast<double>(belonging_indicator(mask_label(mask, a), mask_label(mask, b))));
    };
    for (int ji = 0; ji < j; ++ji) {
        const Quadruplet& q = batch.quadruplets[static_cast<size_t>(ji)];
        const double w = batch.gamma[static_cast<size_t>(ji)] / (3.0 * j);
        push(q.s1, q.s2, w);
        push(q.s1, q.n1, w);
        push(q.n1, q.n2, w);
    }
    for (const PointPair& p : batch.random_pairs) push(p.p1, p.p2, 1.0 / k);

    const int m = static_cast<int>(weight.size());
    Tensor ell_t({m}, ell);
    Tensor inv_ell_t({m});
    for (int i = 0; i < m; ++i) inv_ell_t[i] = 1.0 - ell_t[i];
    Tensor weight_t({m}, weight);

    Var d0 = ops::gather_hw(value_map, idx0);
    Var d1 = ops::gather_hw(value_map, idx1);
    Var diff = ops::sub(d0, d1);
    Var cross = ops::softplus(ops::neg(ops::abs(diff)));  // log(1 + e^{-|d0-d1|})
    Var same = ops::square(diff);
    Var per_pair = ops::add(ops::mul_const(cross, ell_t), ops::mul_const(same, inv_ell_t));
    return ops::sum_all(ops::mul_const(per_pair, weight_t));
}

}  // namespace semdepth
