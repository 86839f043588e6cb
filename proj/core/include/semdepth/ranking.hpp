#pragma once

#include <vector>

#include "semdepth/autodiff.hpp"
#include "semdepth/sampler.hpp"

namespace semdepth {

/// Quadruplets with their uncertainty weights plus the unweighted random
/// in-region pairs of one image.
struct RankingBatch {
    std::vector<Quadruplet> quadruplets;
    std::vector<double> gamma;  // one weight per quadruplet, in [1/e, 1]
    std::vector<PointPair> random_pairs;

    int j_count() const { return static_cast<int>(quadruplets.size()); }
    int k_count() const { return static_cast<int>(random_pairs.size()); }
    void validate() const;
};

/// 1 when the two binary labels differ, else 0.
int belonging_indicator(int label0, int label1);

/// Cross-border pairs (ell=1) pay log(1+exp(-|d0-d1|)); same-region pairs
/// (ell=0) pay (d0-d1)^2.
double pair_loss(double d0, double d1, int ell);

/// gamma = exp(-1 / max(s1/n1, n1/s1)) with probabilities clamped to
/// [1e-6, 1]; always lands in [1/e, 1].
double uncertainty_weight(double s1_prob, double n1_prob);

/// Attaches a weight to every quadruplet from the semantic probability map
/// (H,W) evaluated at the cross-border pair. sem_prob is treated as a
/// constant (no gradient flows through the weights).
RankingBatch make_ranking_batch(SampleSet samples, const Tensor& sem_prob);

/// Aggregate loss: (1/3J) sum_j gamma_j [L(s1,s2)+L(s1,n1)+L(n1,n2)]
/// + (1/K) sum_k L(p1,p2), with indicators looked up in the binary mask.
/// value_map is (N,1,H,W); batch_index selects the sample the point
/// coordinates refer to. Empty J or K terms contribute zero.
Var total_ranking_loss(const Var& value_map, const Tensor& mask, const RankingBatch& batch,
                       int batch_index = 0);

}  // namespace semdepth
