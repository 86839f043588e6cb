#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "semdepth/nn.hpp"

namespace semdepth {

struct NetworkConfig {
    std::vector<int> encoder_channels = {16, 32, 64, 128, 256};  // econv0..4 at strides 2..32
    std::vector<int> decoder_channels = {8, 16, 32, 64, 128};    // scales 0..4
    int sem_classes = 2;     // conditioning one-hot channel count
    int input_height = 64;
    int input_width = 192;
    double d_min = 0.1;      // meters
    double d_max = 100.0;
    bool ssfa_enabled = true;
    double disp_head_bias = -2.5;  // sigmoid pre-activation bias of disparity heads

    static NetworkConfig toy();
    static NetworkConfig full_scale();
    void validate() const;
};

struct FeaturePyramid {
    std::array<Var, 5> econv;  // strides 2, 4, 8, 16, 32
};

/// Plain 5-stage strided-conv encoder (3x3, stride 2, ELU per stage).
struct Encoder {
    std::array<Conv2d, 5> convs;

    Encoder() = default;
    Encoder(int in_ch, const std::vector<int>& channels, std::mt19937_64& rng);
    FeaturePyramid forward(const Var& image) const;
};

/// One spatial alignment block: channel-wise batch norm of the feature,
/// then a learned per-location scale/shift conditioned on the semantic map,
/// then a closing 3x3 convolution.
struct SpatialAlignBlock {
    BatchNorm2d bn;       // no learned affine; alpha/beta take its place
    Conv2d seg_conv;      // C_sem -> C/2, ReLU
    Conv2d alpha_conv;    // C/2 -> C
    Conv2d beta_conv;     // C -> C, fed by the alpha branch output
    Conv2d out_conv;      // C -> C

    SpatialAlignBlock() = default;
    SpatialAlignBlock(int channels, int sem_classes, std::mt19937_64& rng);
    Var forward(const Var& feature, const Var& segmap_resized);
};

/// Depth/semantic feature fusion followed by two alignment blocks with a
/// residual connection around them.
struct SsfaModule {
    Conv2d aconv;  // concat(F_D, F_S) -> C, ELU
    SpatialAlignBlock sab0, sab1;
    long invocations = 0;

    SsfaModule() = default;
    SsfaModule(int channels, int sem_classes, std::mt19937_64& rng);
    Var forward(const Var& f_depth, const Var& f_sem, const Var& segmap);
};

struct SemanticDecoder {
    std::array<Conv2d, 5> upconvs;  // indexed by scale 0..4
    std::array<Conv2d, 5> iconvs;
    std::array<Conv2d, 4> heads;    // scales 0..3, sigmoid

    struct Out {
        std::array<Var, 5> upconv_feats;  // native resolution, for SSFA fusion
        std::array<Var, 4> probs;         // full resolution, scales 0..3
    };

    SemanticDecoder() = default;
    SemanticDecoder(const NetworkConfig& cfg, std::mt19937_64& rng);
    Out forward(const FeaturePyramid& pyr, int full_h, int full_w) const;
};

struct DepthDecoder {
    std::array<Conv2d, 5> upconvs;
    std::array<SsfaModule, 5> ssfa;
    std::array<Conv2d, 5> iconvs;
    std::array<Conv2d, 4> heads;
    bool ssfa_enabled = true;

    struct Out {
        std::array<Var, 4> disps;  // full resolution sigmoid disparity, scales 0..3
    };

    DepthDecoder() = default;
    DepthDecoder(const NetworkConfig& cfg, std::mt19937_64& rng);
    Out forward(const FeaturePyramid& pyr, const std::array<Var, 5>& sem_feats, const Var& segmap,
                int full_h, int full_w);
};

/// Shared-encoder multi-task network: semantic branch plus depth branch
/// fused through five SSFA modules.
struct MultiTaskModel {
    NetworkConfig cfg;
    Encoder encoder;
    SemanticDecoder sem_decoder;
    DepthDecoder depth_decoder;

    struct Outputs {
        std::array<Var, 4> disps;      // full-res sigmoid disparity per scale
        std::array<Var, 4> sem_probs;  // full-res semantic probability per scale
    };

    MultiTaskModel() = default;
    MultiTaskModel(const NetworkConfig& cfg, std::uint64_t seed);

    /// image (N,3,H,W) in [0,1]; segmap (N,C_sem,H,W) one-hot conditioning.
    Outputs forward(const Var& image, const Tensor& segmap);

    void set_training(bool training);
    ParamRegistry params();
    long ssfa_invocations() const;
    void reset_ssfa_counter();
};

/// Two-frame pose regressor: strided conv encoder, 1x1 head, global average;
/// output (N,6) = axis-angle plus translation scaled by 0.01.
struct PoseNet {
    std::array<Conv2d, 5> convs;
    Conv2d head;

    PoseNet() = default;
    PoseNet(const NetworkConfig& cfg, std::uint64_t seed);
    Var forward(const Var& image_pair) const;  // (N,6,H,W) -> (N,6)
    ParamRegistry params();
};

// -- architecture introspection ---------------------------------------------

struct LayerDesc {
    std::string name;
    std::vector<int> in_chns;
    int out_chns = 0;
    int resolution = 1;  // downscale factor of the layer output w.r.t. input image
    std::vector<std::string> inputs;
    std::string activation;  // "ELU", "ReLU", "Sigmoid" or "/"
    int kernel = 3;
    int stride = 1;
};

std::vector<LayerDesc> describe_depth_decoder(const MultiTaskModel& m);
std::vector<LayerDesc> describe_semantic_decoder(const MultiTaskModel& m);
std::vector<LayerDesc> describe_ssfa(const MultiTaskModel& m, int scale);

}  // namespace semdepth
