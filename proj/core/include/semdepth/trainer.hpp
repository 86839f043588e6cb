#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semdepth/data.hpp"
#include "semdepth/losses.hpp"
#include "semdepth/networks.hpp"
#include "semdepth/ranking.hpp"

namespace semdepth {

struct TrainConfig {
    double lr = 1e-4;
    int lr_decay_epochs = 15;      // learning rate divided by 10 every this many epochs
    double lr_decay_factor = 10.0;
    int batch_size = 4;
    int epochs = 20;
    double delta_s = 0.001;        // smoothness weight
    double delta_r = 0.001;        // ranking loss weight
    double alpha = 0.85;           // SSIM weight
    std::uint64_t seed = 0;
    bool enable_ssfa = true;       // semantic conditioning in the depth decoder
    bool enable_srl = true;        // semantic-guided ranking loss
    bool automask = false;         // include identity reprojections in the per-pixel min
    bool rank_on_disparity = false;  // rank disparities instead of metric depth
    double grad_clip = 10.0;       // global gradient norm clip
    int checkpoint_epoch = 0;      // 0 = last epoch
    NetworkConfig net;
    SamplerConfig sampler;

    void validate() const;
    std::string to_json_string() const;
    static TrainConfig from_json_string(const std::string& text);
};

struct LossBreakdown {
    double photometric = 0;
    double semantic = 0;
    double smoothness = 0;
    double ranking = 0;
    double total = 0;
};

/// total = photometric + semantic + delta_s * smoothness + delta_r * ranking.
double compose_total(double photometric, double semantic, double smoothness, double ranking,
                     double delta_s, double delta_r);

/// Adam optimizer over a parameter registry, keyed by parameter name.
class AdamOptimizer {
public:
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    /// Applies one update from the accumulated gradients (after global-norm
    /// clipping) and clears them.
    void step(ParamRegistry& params, double lr, double grad_clip);
    long step_count() const { return step_; }

    std::vector<std::pair<std::string, Tensor>> state_arrays() const;
    void restore_state(const std::map<std::string, Tensor>& arrays);

private:
    std::map<std::string, Tensor> m_, v_;
    long step_ = 0;
};

struct Prediction {
    DepthMap depth;      // finest-scale metric depth of the target frame
    Tensor sem_prob;     // (H,W) finest-scale semantic probability
    Tensor sem_binary;   // thresholded at 0.5
};

/// Owns the multi-task model, the pose network and the optimization state;
/// composes L = L_ph + L_M + delta_s L_s + delta_r L'_SR.
class Trainer {
public:
    explicit Trainer(TrainConfig cfg);

    LossBreakdown train_step(const std::vector<const SceneSample*>& batch);

    /// Full run: per-epoch shuffling, LR schedule, CSV log, per-epoch
    /// checkpoints and quadruplet overlays under run_dir (unless empty).
    void fit(const std::vector<SceneSample>& dataset, const std::filesystem::path& run_dir);

    Prediction predict(const SceneSample& sample);

    /// Fine-tunes a clone of the model on one triplet and returns its
    /// prediction; *this is untouched. Without semantics on the sample only
    /// the self-supervised terms are optimized and the conditioning label is
    /// self-predicted once up front.
    Prediction online_refine(const SceneSample& sample, int iterations = 20);

    void save_checkpoint(const std::filesystem::path& file_prefix) const;
    static Trainer load_checkpoint(const std::filesystem::path& file_prefix);

    std::vector<std::pair<std::string, Tensor>> state_arrays() const;
    void restore_state(const std::map<std::string, Tensor>& arrays);
    std::uint64_t param_hash() const;

    const TrainConfig& config() const { return cfg_; }
    int epoch() const { return epoch_; }
    long step() const { return global_step_; }
    double current_lr() const;
    MultiTaskModel& model() { return model_; }
    PoseNet& pose_net() { return pose_net_; }

private:
    struct StepGraph;
    StepGraph build_losses(const std::vector<const SceneSample*>& batch);
    Tensor conditioning_segmap(const SceneSample& sample) const;
    const SampleSet& cached_samples(const SceneSample& sample);
    void write_quadruplet_overlay(const SceneSample& sample, const std::filesystem::path& dir);

    TrainConfig cfg_;
    MultiTaskModel model_;
    PoseNet pose_net_;
    AdamOptimizer optim_;
    std::mt19937_64 rng_;
    int epoch_ = 0;
    long global_step_ = 0;
    std::unordered_map<std::uint64_t, SampleSet> sampler_cache_;
    std::filesystem::path run_dir_;
};

}  // namespace semdepth
