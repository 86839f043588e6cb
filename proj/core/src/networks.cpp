#include "semdepth/networks.hpp"

#include <stdexcept>

namespace semdepth {

using namespace ops;

NetworkConfig NetworkConfig::toy() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::full_scale() {
    NetworkConfig cfg;
    cfg.encoder_channels = {64, 256, 512, 1024, 2048};
    cfg.decoder_channels = {16, 32, 64, 128, 256};
    cfg.sem_classes = 20;
    cfg.input_height = 192;
    cfg.input_width = 640;
    return cfg;
}

void NetworkConfig::validate() const {
    if (encoder_channels.size() != 5) throw std::invalid_argument("network config: 5 encoder stages required");
    if (decoder_channels.size() != 5) throw std::invalid_argument("network config: 5 decoder scales required");
    if (input_height % 32 != 0 || input_width % 32 != 0)
        throw std::invalid_argument("network config: input size must be divisible by 32");
    if (input_height < 64 || input_width < 64)
        throw std::invalid_argument("network config: input must be at least 64x64 so the coarsest "
                                    "features stay 2 pixels wide");
    if (sem_classes < 2) throw std::invalid_argument("network config: sem_classes must be >= 2");
    if (!(d_min > 0) || d_min >= d_max) throw std::invalid_argument("network config: require 0 < d_min < d_max");
    for (int c : encoder_channels)
        if (c <= 0) throw std::invalid_argument("network config: encoder channels must be positive");
    for (int c : decoder_channels)
        if (c < 2) throw std::invalid_argument("network config: decoder channels must be >= 2");
}

Encoder::Encoder(int in_ch, const std::vector<int>& channels, std::mt19937_64& rng) {
    int prev = in_ch;
    for (size_t i = 0; i < 5; ++i) {
        convs[i] = Conv2d(prev, channels[i], 3, 2, PadMode::Zero, rng);
        prev = channels[i];
    }
}

FeaturePyramid Encoder::forward(const Var& image) const {
    FeaturePyramid pyr;
    Var x = image;
    for (size_t i = 0; i < 5; ++i) {
        x = elu(convs[i](x));
        pyr.econv[i] = x;
    }
    return pyr;
}

SpatialAlignBlock::SpatialAlignBlock(int channels, int sem_classes, std::mt19937_64& rng) {
    const int hidden = std::max(channels / 2, 1);
    bn = BatchNorm2d(channels);
    seg_conv = Conv2d(sem_classes, hidden, 3, 1, PadMode::Reflect, rng);
    alpha_conv = Conv2d(hidden, channels, 3, 1, PadMode::Reflect, rng);
    beta_conv = Conv2d(channels, channels, 3, 1, PadMode::Reflect, rng);
    out_conv = Conv2d(channels, channels, 3, 1, PadMode::Reflect, rng);
}

Var SpatialAlignBlock::forward(const Var& feature, const Var& segmap_resized) {
    Var f_norm = bn(feature);
    Var hidden = relu(seg_conv(segmap_resized));
    Var alpha = alpha_conv(hidden);
    Var beta = beta_conv(alpha);
    Var aligned = add(mul(alpha, f_norm), beta);
    return out_conv(aligned);
}

SsfaModule::SsfaModule(int channels, int sem_classes, std::mt19937_64& rng)
    : aconv(2 * channels, channels, 3, 1, PadMode::Reflect, rng),
      sab0(channels, sem_classes, rng),
      sab1(channels, sem_classes, rng) {}

Var SsfaModule::forward(const Var& f_depth, const Var& f_sem, const Var& segmap) {
    if (!f_depth->val.same_shape(f_sem->val))
        throw std::invalid_argument("ssfa: depth/semantic feature shape mismatch " +
                                    f_depth->val.shape_str() + " vs " + f_sem->val.shape_str());
    ++invocations;
    Var fused = elu(aconv(concat_channels({f_depth, f_sem})));
    Var seg = resize_bilinear(segmap, fused->val.dim(2), fused->val.dim(3));
    Var aligned = sab1.forward(sab0.forward(fused, seg), seg);
    return add(fused, aligned);
}

SemanticDecoder::SemanticDecoder(const NetworkConfig& cfg, std::mt19937_64& rng) {
    const auto& enc = cfg.encoder_channels;
    const auto& dec = cfg.decoder_channels;
    for (int i = 4; i >= 0; --i) {
        const int up_in = (i == 4) ? enc[4] : dec[i + 1];
        upconvs[i] = Conv2d(up_in, dec[i], 3, 1, PadMode::Reflect, rng);
        const int ic_in = dec[i] + (i >= 1 ? enc[i - 1] : 0);
        iconvs[i] = Conv2d(ic_in, dec[i], 3, 1, PadMode::Reflect, rng);
        if (i <= 3) heads[i] = Conv2d(dec[i], 1, 3, 1, PadMode::Reflect, rng);
    }
}

SemanticDecoder::Out SemanticDecoder::forward(const FeaturePyramid& pyr, int full_h, int full_w) const {
    Out out;
    Var x = pyr.econv[4];
    for (int i = 4; i >= 0; --i) {
        Var up = elu(upconvs[i](x));
        out.upconv_feats[i] = up;
        Var y = upsample_nearest2x(up);
        if (i >= 1) y = concat_channels({y, pyr.econv[i - 1]});
        x = elu(iconvs[i](y));
        if (i <= 3) out.probs[i] = resize_bilinear(sigmoid(heads[i](x)), full_h, full_w);
    }
    return out;
}

DepthDecoder::DepthDecoder(const NetworkConfig& cfg, std::mt19937_64& rng) {
    const auto& enc = cfg.encoder_channels;
    const auto& dec = cfg.decoder_channels;
    ssfa_enabled = cfg.ssfa_enabled;
    for (int i = 4; i >= 0; --i) {
        const int up_in = (i == 4) ? enc[4] : dec[i + 1];
        upconvs[i] = Conv2d(up_in, dec[i], 3, 1, PadMode::Reflect, rng);
        if (ssfa_enabled) ssfa[i] = SsfaModule(dec[i], cfg.sem_classes, rng);
        const int ic_in = dec[i] + (i >= 1 ? enc[i - 1] : 0);
        iconvs[i] = Conv2d(ic_in, dec[i], 3, 1, PadMode::Reflect, rng);
        if (i <= 3)
            heads[i] = Conv2d(dec[i], 1, 3, 1, PadMode::Reflect, rng, 1.0, cfg.disp_head_bias);
    }
}

DepthDecoder::Out DepthDecoder::forward(const FeaturePyramid& pyr, const std::array<Var, 5>& sem_feats,
                                        const Var& segmap, int full_h, int full_w) {
    Out out;
    Var x = pyr.econv[4];
    for (int i = 4; i >= 0; --i) {
        Var up = elu(upconvs[i](x));
        Var f = ssfa_enabled ? ssfa[i].forward(up, sem_feats[i], segmap) : up;
        Var y = upsample_nearest2x(f);
        if (i >= 1) y = concat_channels({y, pyr.econv[i - 1]});
        x = elu(iconvs[i](y));
        if (i <= 3) out.disps[i] = resize_bilinear(sigmoid(heads[i](x)), full_h, full_w);
    }
    return out;
}

MultiTaskModel::MultiTaskModel(const NetworkConfig& config, std::uint64_t seed) : cfg(config) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    encoder = Encoder(3, cfg.encoder_channels, rng);
    sem_decoder = SemanticDecoder(cfg, rng);
    depth_decoder = DepthDecoder(cfg, rng);
}

MultiTaskModel::Outputs MultiTaskModel::forward(const Var& image, const Tensor& segmap) {
    const Shape& s = image->val.shape();
    if (s.size() != 4 || s[1] != 3 || s[2] != cfg.input_height || s[3] != cfg.input_width)
        throw std::invalid_argument("model forward: expected (N,3," + std::to_string(cfg.input_height) +
                                    "," + std::to_string(cfg.input_width) + ") image, got " +
                                    image->val.shape_str());
    if (cfg.ssfa_enabled) {
        const Shape& gs = segmap.shape();
        if (gs.size() != 4 || gs[0] != s[0] || gs[1] != cfg.sem_classes || gs[2] != s[2] || gs[3] != s[3])
            throw std::invalid_argument("model forward: segmap shape mismatch " + segmap.shape_str());
    }
    FeaturePyramid pyr = encoder.forward(image);
    SemanticDecoder::Out sem = sem_decoder.forward(pyr, cfg.input_height, cfg.input_width);
    Var seg_var = make_const(segmap);
    DepthDecoder::Out dep = depth_decoder.forward(pyr, sem.upconv_feats, seg_var, cfg.input_height,
                                                  cfg.input_width);
    return Outputs{dep.disps, sem.probs};
}

void MultiTaskModel::set_training(bool training) {
    if (!depth_decoder.ssfa_enabled) return;
    for (auto& m : depth_decoder.ssfa) {
        m.sab0.bn.training = training;
        m.sab1.bn.training = training;
    }
}

ParamRegistry MultiTaskModel::params() {
    ParamRegistry reg;
    for (int i = 0; i < 5; ++i) reg.add_conv("encoder.conv" + std::to_string(i), encoder.convs[i]);
    for (int i = 4; i >= 0; --i) {
        const std::string si = std::to_string(i);
        reg.add_conv("sem.upconv" + si, sem_decoder.upconvs[i]);
        reg.add_conv("sem.iconv" + si, sem_decoder.iconvs[i]);
        if (i <= 3) reg.add_conv("sem.head" + si, sem_decoder.heads[i]);
    }
    for (int i = 4; i >= 0; --i) {
        const std::string si = std::to_string(i);
        reg.add_conv("depth.upconv" + si, depth_decoder.upconvs[i]);
        if (depth_decoder.ssfa_enabled) {
            SsfaModule& m = depth_decoder.ssfa[i];
            reg.add_conv("depth.ssfa" + si + ".aconv", m.aconv);
            for (int b = 0; b < 2; ++b) {
                SpatialAlignBlock& sab = b == 0 ? m.sab0 : m.sab1;
                const std::string p = "depth.ssfa" + si + ".sab" + std::to_string(b);
                reg.add_conv(p + ".seg_conv", sab.seg_conv);
                reg.add_conv(p + ".alpha_conv", sab.alpha_conv);
                reg.add_conv(p + ".beta_conv", sab.beta_conv);
                reg.add_conv(p + ".out_conv", sab.out_conv);
                reg.add_bn(p + ".bn", sab.bn);
            }
        }
        reg.add_conv("depth.iconv" + si, depth_decoder.iconvs[i]);
        if (i <= 3) reg.add_conv("depth.head" + si, depth_decoder.heads[i]);
    }
    return reg;
}

long MultiTaskModel::ssfa_invocations() const {
    long total = 0;
    if (depth_decoder.ssfa_enabled)
        for (const auto& m : depth_decoder.ssfa) total += m.invocations;
    return total;
}

void MultiTaskModel::reset_ssfa_counter() {
    if (depth_decoder.ssfa_enabled)
        for (auto& m : depth_decoder.ssfa) m.invocations = 0;
}

PoseNet::PoseNet(const NetworkConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    int prev = 6;
    for (size_t i = 0; i < 5; ++i) {
        convs[i] = Conv2d(prev, cfg.encoder_channels[i], 3, 2, PadMode::Zero, rng);
        prev = cfg.encoder_channels[i];
    }
    head = Conv2d(prev, 6, 1, 1, PadMode::Zero, rng, 0.01);
    head.pad = 0;
}

Var PoseNet::forward(const Var& image_pair) const {
    const Shape& s = image_pair->val.shape();
    if (s.size() != 4 || s[1] != 6)
        throw std::invalid_argument("pose forward: (N,6,H,W) concatenated pair required");
    Var x = image_pair;
    for (size_t i = 0; i < 5; ++i) x = elu(convs[i](x));
    Var pooled = mean_hw(head(x));
    return affine_channels(pooled, {1.0, 1.0, 1.0, 0.01, 0.01, 0.01});
}

ParamRegistry PoseNet::params() {
    ParamRegistry reg;
    for (int i = 0; i < 5; ++i) reg.add_conv("pose.conv" + std::to_string(i), convs[i]);
    reg.add_conv("pose.head", head);
    return reg;
}

// -- introspection -----------------------------------------------------------

namespace {

LayerDesc conv_desc(std::string name, const Conv2d& c, int resolution, std::vector<std::string> inputs,
                    std::string activation) {
    LayerDesc d;
    d.name = std::move(name);
    d.in_chns = {c.in_channels()};
    d.out_chns = c.out_channels();
    d.resolution = resolution;
    d.inputs = std::move(inputs);
    d.activation = std::move(activation);
    d.kernel = c.kernel();
    d.stride = c.stride;
    return d;
}

// Concat-fed convolutions report each input's channel share.
LayerDesc concat_conv_desc(std::string name, const Conv2d& c, std::vector<int> in_split, int resolution,
                           std::vector<std::string> inputs, std::string activation) {
    LayerDesc d = conv_desc(std::move(name), c, resolution, std::move(inputs), std::move(activation));
    d.in_chns = std::move(in_split);
    return d;
}

}  // namespace

std::vector<LayerDesc> describe_depth_decoder(const MultiTaskModel& m) {
    std::vector<LayerDesc> out;
    const auto& dd = m.depth_decoder;
    const auto& enc = m.cfg.encoder_channels;
    for (int i = 4; i >= 0; --i) {
        const std::string si = std::to_string(i);
        const int res_in = 1 << (i + 1);   // feature resolution before the x2 upsample
        const int res_out = 1 << i;
        const std::string up_src = (i == 4) ? "econv4" : ("D_iconv" + std::to_string(i + 1));
        out.push_back(conv_desc("D_upconv" + si, dd.upconvs[i], res_in, {up_src}, "ELU"));
        if (dd.ssfa_enabled) {
            const int c = dd.upconvs[i].out_channels();
            out.push_back(concat_conv_desc("aconv" + si, dd.ssfa[i].aconv, {c, c}, res_in,
                                           {"D_upconv" + si, "S_upconv" + si}, "ELU"));
            LayerDesc safe;
            safe.name = "SAFE" + si;
            safe.in_chns = {c, m.cfg.sem_classes};
            safe.out_chns = c;
            safe.resolution = res_in;
            safe.inputs = {"aconv" + si, "Segmap"};
            safe.activation = "/";
            out.push_back(safe);
        }
        const std::string carried = dd.ssfa_enabled ? ("SAFE" + si) : ("D_upconv" + si);
        std::vector<std::string> ic_inputs = {"up(" + carried + ")"};
        std::vector<int> ic_split = {dd.upconvs[i].out_channels()};
        if (i >= 1) {
            ic_inputs.push_back("econv" + std::to_string(i - 1));
            ic_split.push_back(enc[i - 1]);
        }
        out.push_back(concat_conv_desc("D_iconv" + si, dd.iconvs[i], ic_split, res_out, ic_inputs, "ELU"));
        if (i <= 3)
            out.push_back(conv_desc("D_disp" + si, dd.heads[i], 1, {"D_iconv" + si}, "Sigmoid"));
    }
    return out;
}

std::vector<LayerDesc> describe_semantic_decoder(const MultiTaskModel& m) {
    std::vector<LayerDesc> out;
    const auto& sd = m.sem_decoder;
    const auto& enc = m.cfg.encoder_channels;
    for (int i = 4; i >= 0; --i) {
        const std::string si = std::to_string(i);
        const int res_in = 1 << (i + 1);
        const int res_out = 1 << i;
        const std::string up_src = (i == 4) ? "econv4" : ("S_iconv" + std::to_string(i + 1));
        out.push_back(conv_desc("S_upconv" + si, sd.upconvs[i], res_in, {up_src}, "ELU"));
        std::vector<std::string> ic_inputs = {"up(S_upconv" + si + ")"};
        std::vector<int> ic_split = {sd.upconvs[i].out_channels()};
        if (i >= 1) {
            ic_inputs.push_back("econv" + std::to_string(i - 1));
            ic_split.push_back(enc[i - 1]);
        }
        out.push_back(concat_conv_desc("S_iconv" + si, sd.iconvs[i], ic_split, res_out, ic_inputs, "ELU"));
        if (i <= 3)
            out.push_back(conv_desc("S_disp" + si, sd.heads[i], 1, {"S_iconv" + si}, "Sigmoid"));
    }
    return out;
}

std::vector<LayerDesc> describe_ssfa(const MultiTaskModel& m, int scale) {
    if (!m.depth_decoder.ssfa_enabled) throw std::invalid_argument("describe_ssfa: ssfa disabled");
    if (scale < 0 || scale > 4) throw std::invalid_argument("describe_ssfa: scale out of range");
    const SsfaModule& mod = m.depth_decoder.ssfa[scale];
    const int c = mod.aconv.out_channels();
    const std::string fused = "aconv" + std::to_string(scale);
    std::vector<LayerDesc> out;
    for (int b = 0; b < 2; ++b) {
        const SpatialAlignBlock& sab = b == 0 ? mod.sab0 : mod.sab1;
        const std::string sb = std::to_string(b);
        const std::string feature_src = b == 0 ? fused : "Conv2d_0_post";
        LayerDesc bn;
        bn.name = "BatchNorm2d_" + sb;
        bn.in_chns = {sab.bn.channels()};
        bn.out_chns = sab.bn.channels();
        bn.resolution = 0;
        bn.inputs = {feature_src};
        bn.activation = "/";
        bn.kernel = 0;
        bn.stride = 0;
        out.push_back(bn);
        out.push_back(conv_desc("Conv2d_" + sb, sab.seg_conv, 0, {"Interpolate_" + sb}, "ReLU"));
        out.push_back(conv_desc("alphaConv2d_" + sb, sab.alpha_conv, 0, {"Conv2d_" + sb}, "/"));
        out.push_back(conv_desc("betaConv2d_" + sb, sab.beta_conv, 0, {"alphaConv2d_" + sb}, "/"));
        LayerDesc align;
        align.name = "Align_" + sb;
        align.in_chns = {c, c, c};
        align.out_chns = c;
        align.resolution = 0;
        align.inputs = {"BatchNorm2d_" + sb, "alphaConv2d_" + sb, "betaConv2d_" + sb};
        align.activation = "/";
        align.kernel = 0;
        align.stride = 0;
        out.push_back(align);
        out.push_back(conv_desc("Conv2d_" + sb + "_post", sab.out_conv, 0, {"Align_" + sb}, "/"));
    }
    return out;
}

}  // namespace semdepth
