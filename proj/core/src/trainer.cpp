#include "semdepth/trainer.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "semdepth/io.hpp"
#include "semdepth/metrics.hpp"

namespace semdepth {

using nlohmann::json;
using namespace ops;

void TrainConfig::validate() const {
    if (lr <= 0) throw std::invalid_argument("train config: lr must be positive");
    if (lr_decay_epochs <= 0 || lr_decay_factor < 1)
        throw std::invalid_argument("train config: bad lr decay");
    if (batch_size <= 0 || epochs <= 0) throw std::invalid_argument("train config: bad batch/epochs");
    if (delta_s < 0 || delta_r < 0 || grad_clip <= 0)
        throw std::invalid_argument("train config: weights must be >= 0 and grad_clip > 0");
    if (alpha < 0 || alpha > 1) throw std::invalid_argument("train config: alpha must be in [0,1]");
    net.validate();
    sampler.validate();
}

std::string TrainConfig::to_json_string() const {
    json j;
    j["lr"] = lr;
    j["lr_decay_epochs"] = lr_decay_epochs;
    j["lr_decay_factor"] = lr_decay_factor;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["delta_s"] = delta_s;
    j["delta_r"] = delta_r;
    j["alpha"] = alpha;
    j["seed"] = seed;
    j["enable_ssfa"] = enable_ssfa;
    j["enable_srl"] = enable_srl;
    j["automask"] = automask;
    j["rank_on_disparity"] = rank_on_disparity;
    j["grad_clip"] = grad_clip;
    j["checkpoint_epoch"] = checkpoint_epoch;
    j["net"] = {{"encoder_channels", net.encoder_channels},
                {"decoder_channels", net.decoder_channels},
                {"sem_classes", net.sem_classes},
                {"input_height", net.input_height},
                {"input_width", net.input_width},
                {"d_min", net.d_min},
                {"d_max", net.d_max},
                {"disp_head_bias", net.disp_head_bias}};
    j["sampler"] = {{"r", sampler.r},
                    {"omega1", sampler.omega1},
                    {"omega2_min", sampler.omega2_min},
                    {"omega2_max", sampler.omega2_max},
                    {"k_prime", sampler.k_prime},
                    {"epsilon", sampler.epsilon},
                    {"max_edge_points", sampler.max_edge_points},
                    {"foreground_pairs_only", sampler.foreground_pairs_only}};
    return j.dump(2);
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
    const json j = json::parse(text);
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.lr_decay_epochs = j.value("lr_decay_epochs", c.lr_decay_epochs);
    c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.delta_s = j.value("delta_s", c.delta_s);
    c.delta_r = j.value("delta_r", c.delta_r);
    c.alpha = j.value("alpha", c.alpha);
    c.seed = j.value("seed", c.seed);
    c.enable_ssfa = j.value("enable_ssfa", c.enable_ssfa);
    c.enable_srl = j.value("enable_srl", c.enable_srl);
    c.automask = j.value("automask", c.automask);
    c.rank_on_disparity = j.value("rank_on_disparity", c.rank_on_disparity);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.checkpoint_epoch = j.value("checkpoint_epoch", c.checkpoint_epoch);
    if (j.contains("net")) {
        const json& n = j["net"];
        c.net.encoder_channels = n.value("encoder_channels", c.net.encoder_channels);
        c.net.decoder_channels = n.value("decoder_channels", c.net.decoder_channels);
        c.net.sem_classes = n.value("sem_classes", c.net.sem_classes);
        c.net.input_height = n.value("input_height", c.net.input_height);
        c.net.input_width = n.value("input_width", c.net.input_width);
        c.net.d_min = n.value("d_min", c.net.d_min);
        c.net.d_max = n.value("d_max", c.net.d_max);
        c.net.disp_head_bias = n.value("disp_head_bias", c.net.disp_head_bias);
    }
    if (j.contains("sampler")) {
        const json& s = j["sampler"];
        c.sampler.r = s.value("r", c.sampler.r);
        c.sampler.omega1 = s.value("omega1", c.sampler.omega1);
        c.sampler.omega2_min = s.value("omega2_min", c.sampler.omega2_min);
        c.sampler.omega2_max = s.value("omega2_max", c.sampler.omega2_max);
        c.sampler.k_prime = s.value("k_prime", c.sampler.k_prime);
        c.sampler.epsilon = s.value("epsilon", c.sampler.epsilon);
        c.sampler.max_edge_points = s.value("max_edge_points", c.sampler.max_edge_points);
        c.sampler.foreground_pairs_only = s.value("foreground_pairs_only", c.sampler.foreground_pairs_only);
    }
    return c;
}

double compose_total(double photometric, double semantic, double smoothness, double ranking,
                     double delta_s, double delta_r) {
    return photometric + semantic + delta_s * smoothness + delta_r * ranking;
}

// -- Adam ---------------------------------------------------------------------

void AdamOptimizer::step(ParamRegistry& params, double lr, double grad_clip) {
    double norm_sq = 0.0;
    for (auto& [name, p] : params.params)
        if (p->has_grad())
            for (std::int64_t i = 0; i < p->grad.size(); ++i) norm_sq += p->grad[i] * p->grad[i];
    const double norm = std::sqrt(norm_sq);
    const double scale = (grad_clip > 0 && norm > grad_clip) ? grad_clip / norm : 1.0;

    ++step_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (auto& [name, p] : params.params) {
        if (!p->has_grad()) continue;
        Tensor& m = m_.try_emplace(name, Tensor(p->val.shape())).first->second;
        Tensor& v = v_.try_emplace(name, Tensor(p->val.shape())).first->second;
        for (std::int64_t i = 0; i < p->val.size(); ++i) {
            const double g = p->grad[i] * scale;
            m[i] = beta1 * m[i] + (1 - beta1) * g;
            v[i] = beta2 * v[i] + (1 - beta2) * g * g;
            p->val[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
        p->grad = Tensor();
    }
}

std::vector<std::pair<std::string, Tensor>> AdamOptimizer::state_arrays() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& [name, t] : m_) out.emplace_back("adam.m." + name, t);
    for (const auto& [name, t] : v_) out.emplace_back("adam.v." + name, t);
    out.emplace_back("adam.step", Tensor::scalar(static_cast<double>(step_)));
    return out;
}

void AdamOptimizer::restore_state(const std::map<std::string, Tensor>& arrays) {
    m_.clear();
    v_.clear();
    step_ = 0;
    for (const auto& [name, t] : arrays) {
        if (name.rfind("adam.m.", 0) == 0) m_[name.substr(7)] = t;
        else if (name.rfind("adam.v.", 0) == 0) v_[name.substr(7)] = t;
        else if (name == "adam.step") step_ = static_cast<long>(t[0]);
    }
}

// -- trainer ---------------------------------------------------------------------

namespace {

Tensor batch_frames(const std::vector<const SceneSample*>& batch, int frame) {
    const int b = static_cast<int>(batch.size());
    const int h = batch[0]->height(), w = batch[0]->width();
    Tensor out({b, 3, h, w});
    for (int i = 0; i < b; ++i) {
        const Tensor& f = batch[static_cast<size_t>(i)]->frames[static_cast<size_t>(frame)];
        if (f.dim(1) != h || f.dim(2) != w)
            throw std::invalid_argument("train batch: mixed image sizes");
        std::copy(f.data(), f.data() + f.size(), out.data() + static_cast<std::int64_t>(i) * f.size());
    }
    return out;
}

Tensor slice_plane(const Tensor& batched, int index) {  // (N,1,H,W) -> (H,W)
    const int h = batched.dim(2), w = batched.dim(3);
    Tensor out({h, w});
    const double* src = batched.data() + static_cast<std::int64_t>(index) * h * w;
    std::copy(src, src + static_cast<std::int64_t>(h) * w, out.data());
    return out;
}

std::uint64_t label_hash(const Tensor& label) {
    std::uint64_t h = 1469598103934665603ull;
    const auto* bytes = reinterpret_cast<const unsigned char*>(label.data());
    for (size_t i = 0; i < sizeof(double) * static_cast<size_t>(label.size()); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
    }
    return h;
}

void check_finite(double v, const char* term) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite loss term: ") + term);
}

}  // namespace

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.net.ssfa_enabled = cfg_.enable_ssfa;
    cfg_.validate();
    model_ = MultiTaskModel(cfg_.net, cfg_.seed);
    pose_net_ = PoseNet(cfg_.net, cfg_.seed + 1);
    rng_.seed(cfg_.seed + 2);
}

double Trainer::current_lr() const {
    return cfg_.lr / std::pow(cfg_.lr_decay_factor, epoch_ / cfg_.lr_decay_epochs);
}

Tensor Trainer::conditioning_segmap(const SceneSample& sample) const {
    const int h = sample.height(), w = sample.width();
    if (sample.has_semantics) {
        Tensor seg = one_hot_labels(sample.training_label(), cfg_.net.sem_classes);
        return seg;
    }
    // No label: neutral soft conditioning.
    return Tensor({cfg_.net.sem_classes, h, w}, 1.0 / cfg_.net.sem_classes);
}

const SampleSet& Trainer::cached_samples(const SceneSample& sample) {
    const Tensor& label = sample.training_label();
    const std::uint64_t key = label_hash(label);
    auto it = sampler_cache_.find(key);
    if (it != sampler_cache_.end()) return it->second;
    const Tensor grad = sobel_magnitude(grayscale(sample.frames[1]));
    std::mt19937_64 srng(cfg_.sampler.seed ^ key);
    SampleSet set = sample_image(label, grad, cfg_.sampler, srng);
    return sampler_cache_.emplace(key, std::move(set)).first->second;
}

struct Trainer::StepGraph {
    Var total;
    LossBreakdown breakdown;
};

Trainer::StepGraph Trainer::build_losses(const std::vector<const SceneSample*>& batch) {
    if (batch.empty()) throw std::invalid_argument("train step: empty batch");
    const int b = static_cast<int>(batch.size());
    const int h = batch[0]->height(), w = batch[0]->width();
    const Intrinsics& k = batch[0]->intrinsics;
    for (const SceneSample* s : batch)
        if (std::abs(s->intrinsics.fx - k.fx) > 1e-9 || std::abs(s->intrinsics.fy - k.fy) > 1e-9 ||
            std::abs(s->intrinsics.cx - k.cx) > 1e-9 || std::abs(s->intrinsics.cy - k.cy) > 1e-9)
            throw std::invalid_argument("train step: mixed intrinsics inside one batch");

    Var target = make_const(batch_frames(batch, 1));
    Var prev = make_const(batch_frames(batch, 0));
    Var next = make_const(batch_frames(batch, 2));

    Tensor segmap({b, cfg_.net.sem_classes, h, w});
    for (int i = 0; i < b; ++i) {
        Tensor s = conditioning_segmap(*batch[static_cast<size_t>(i)]);
        std::copy(s.data(), s.data() + s.size(), segmap.data() + static_cast<std::int64_t>(i) * s.size());
    }

    MultiTaskModel::Outputs out = model_.forward(target, segmap);
    Var pose_prev = pose_net_.forward(concat_channels({target, prev}));
    Var pose_next = pose_net_.forward(concat_channels({target, next}));

    PhotometricConfig pcfg;
    pcfg.alpha = cfg_.alpha;

    const double min_disp = 1.0 / cfg_.net.d_max;
    const double max_disp = 1.0 / cfg_.net.d_min;
    const Tensor ones_map = Tensor::full({b, 1, h, w}, 1.0);

    Var l_ph, l_smooth;
    std::array<Var, 4> depths;  // metric depth per scale
    for (int s = 0; s < 4; ++s) {
        Var disp_phys = add_scalar(mul_scalar(out.disps[s], max_disp - min_disp), min_disp);
        depths[s] = div(make_const(ones_map), disp_phys);

        std::vector<Var> synths;
        std::vector<Tensor> masks;
        for (int src = 0; src < 2; ++src) {
            const Var& pose = src == 0 ? pose_prev : pose_next;
            const Var& source = src == 0 ? prev : next;
            Var grid = reproject_grid(depths[s], pose, k);
            synths.push_back(grid_sample(source, grid));
            masks.push_back(grid_valid_mask(grid->val, h, w));
        }
        if (cfg_.automask) {
            // Identity reprojections let static pixels win the minimum; the
            // small offset breaks exact ties in favor of the warped sources.
            synths.push_back(add_const(prev, Tensor::full(prev->val.shape(), 1e-5)));
            synths.push_back(add_const(next, Tensor::full(next->val.shape(), 1e-5)));
            masks.push_back(ones_map);
            masks.push_back(ones_map);
        }
        Var ph_s = min_reprojection_loss(target, synths, masks, pcfg);
        Var sm_s = smoothness_loss(out.disps[s], target);
        l_ph = s == 0 ? ph_s : add(l_ph, ph_s);
        l_smooth = s == 0 ? sm_s : add(l_smooth, sm_s);
    }
    l_ph = mul_scalar(l_ph, 0.25);
    l_smooth = mul_scalar(l_smooth, 0.25);

    // Semantic supervision, over samples that carry a real label.
    Var l_sem;
    {
        std::vector<int> labeled;
        for (int i = 0; i < b; ++i)
            if (batch[static_cast<size_t>(i)]->has_semantics && !batch[static_cast<size_t>(i)]->self_labeled)
                labeled.push_back(i);
        if (!labeled.empty()) {
            Tensor label_batch({b, 1, h, w});
            for (int i : labeled) {
                const Tensor& l = batch[static_cast<size_t>(i)]->training_label();
                std::copy(l.data(), l.data() + l.size(),
                          label_batch.data() + static_cast<std::int64_t>(i) * l.size());
            }
            // Mask out unlabeled samples by matching the prediction there.
            Tensor keep({b, 1, h, w});
            for (int i : labeled) {
                double* dst = keep.data() + static_cast<std::int64_t>(i) * h * w;
                std::fill(dst, dst + static_cast<std::int64_t>(h) * w, 1.0);
            }
            const double scale = static_cast<double>(b) / static_cast<double>(labeled.size());
            for (int s = 0; s < 4; ++s) {
                Var masked_pred = mul_const(out.sem_probs[s], keep);
                Var bce = bce_loss(masked_pred, label_batch);
                l_sem = s == 0 ? bce : add(l_sem, bce);
            }
            l_sem = mul_scalar(l_sem, 0.25 * scale);
        }
    }

    // Semantic-guided ranking loss on the finest scale.
    Var l_rank;
    if (cfg_.enable_srl) {
        const Var& value_map = cfg_.rank_on_disparity ? out.disps[0] : depths[0];
        Var acc;
        int counted = 0;
        for (int i = 0; i < b; ++i) {
            const SceneSample& sample = *batch[static_cast<size_t>(i)];
            if (!sample.has_semantics) continue;
            const SampleSet& set = cached_samples(sample);
            const Tensor sem_prob = slice_plane(out.sem_probs[0]->val, i);  // detached
            RankingBatch rb = make_ranking_batch(set, sem_prob);
            Var li = total_ranking_loss(value_map, sample.training_label(), rb, i);
            acc = counted == 0 ? li : add(acc, li);
            ++counted;
        }
        if (counted > 0) l_rank = mul_scalar(acc, 1.0 / counted);
    }

    StepGraph g;
    g.breakdown.photometric = l_ph->val[0];
    g.breakdown.smoothness = l_smooth->val[0];
    g.breakdown.semantic = l_sem ? l_sem->val[0] : 0.0;
    g.breakdown.ranking = l_rank ? l_rank->val[0] : 0.0;
    check_finite(g.breakdown.photometric, "photometric");
    check_finite(g.breakdown.smoothness, "smoothness");
    check_finite(g.breakdown.semantic, "semantic");
    check_finite(g.breakdown.ranking, "ranking");

    g.total = add(l_ph, mul_scalar(l_smooth, cfg_.delta_s));
    if (l_sem) g.total = add(g.total, l_sem);
    if (l_rank) g.total = add(g.total, mul_scalar(l_rank, cfg_.delta_r));
    g.breakdown.total = g.total->val[0];
    check_finite(g.breakdown.total, "total");
    return g;
}

LossBreakdown Trainer::train_step(const std::vector<const SceneSample*>& batch) {
    model_.set_training(true);
    StepGraph g = build_losses(batch);
    backward(g.total);

    ParamRegistry reg = model_.params();
    ParamRegistry pose_reg = pose_net_.params();
    for (auto& p : pose_reg.params) reg.params.push_back(p);

    for (auto& [name, p] : reg.params)
        if (p->has_grad() && !p->grad.all_finite()) {
            if (!run_dir_.empty()) {
                const auto dump = run_dir_ / ("nan_dump_step_" + std::to_string(global_step_));
                std::filesystem::create_directories(dump);
                save_image_rgb(batch[0]->frames[1], dump / "target.png");
                std::ofstream info(dump / "info.txt");
                info << "step " << global_step_ << "\nparam " << name << "\n";
            }
            throw std::runtime_error("NaN gradient in parameter " + name + " at step " +
                                     std::to_string(global_step_));
        }

    optim_.step(reg, current_lr(), cfg_.grad_clip);
    ++global_step_;
    return g.breakdown;
}

void Trainer::fit(const std::vector<SceneSample>& dataset, const std::filesystem::path& run_dir) {
    if (dataset.empty()) throw std::invalid_argument("fit: empty dataset");
    run_dir_ = run_dir;
    std::ofstream csv;
    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir);
        std::ofstream cfg_out(run_dir / "config.json");
        cfg_out << cfg_.to_json_string() << "\n";
        csv.open(run_dir / "losses.csv");
        csv << "step,epoch,lr,photometric,semantic,smoothness,ranking,total\n";
    }

    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (; epoch_ < cfg_.epochs; ++epoch_) {
        std::shuffle(order.begin(), order.end(), rng_);
        if (!run_dir.empty()) {
            const SceneSample& demo = dataset[order[0]];
            if (demo.has_semantics) write_quadruplet_overlay(demo, run_dir);
        }
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg_.batch_size)) {
            std::vector<const SceneSample*> batch;
            for (size_t i = start; i < std::min(order.size(), start + static_cast<size_t>(cfg_.batch_size)); ++i)
                batch.push_back(&dataset[order[i]]);
            const LossBreakdown l = train_step(batch);
            if (csv)
                csv << global_step_ << "," << epoch_ << "," << current_lr() << "," << l.photometric
                    << "," << l.semantic << "," << l.smoothness << "," << l.ranking << "," << l.total
                    << "\n";
        }
        if (!run_dir.empty()) {
            char name[64];
            std::snprintf(name, sizeof(name), "ckpt_epoch_%03d", epoch_ + 1);
            save_checkpoint(run_dir / name);
        }
    }
}

void Trainer::write_quadruplet_overlay(const SceneSample& sample, const std::filesystem::path& dir) {
    const SampleSet& set = cached_samples(sample);
    Tensor img = sample.frames[1];
    auto paint = [&img](PixCoord p, double r, double g, double b) {
        if (p.y < 0 || p.y >= img.dim(1) || p.x < 0 || p.x >= img.dim(2)) return;
        img.at(0, p.y, p.x) = r;
        img.at(1, p.y, p.x) = g;
        img.at(2, p.y, p.x) = b;
    };
    for (const Quadruplet& q : set.quadruplets) {
        paint(q.s2, 1.0, 0.6, 0.0);
        paint(q.n2, 0.0, 0.8, 1.0);
        paint(q.s1, 1.0, 0.0, 0.0);
        paint(q.n1, 0.0, 0.0, 1.0);
    }
    char name[64];
    std::snprintf(name, sizeof(name), "quadruplets_epoch_%03d.png", epoch_);
    save_image_rgb(img, dir / name);
}

Prediction Trainer::predict(const SceneSample& sample) {
    model_.set_training(false);
    Var target = make_const(batch_frames({&sample}, 1));
    Tensor segmap({1, cfg_.net.sem_classes, sample.height(), sample.width()});
    {
        Tensor s = conditioning_segmap(sample);
        std::copy(s.data(), s.data() + s.size(), segmap.data());
    }
    MultiTaskModel::Outputs out = model_.forward(target, segmap);
    if (!sample.has_semantics && cfg_.enable_ssfa) {
        // Condition on the self-predicted binary label and run again.
        Tensor self_label = slice_plane(out.sem_probs[0]->val, 0);
        for (std::int64_t i = 0; i < self_label.size(); ++i)
            self_label[i] = self_label[i] >= 0.5 ? 1.0 : 0.0;
        Tensor seg2 = one_hot_labels(self_label, cfg_.net.sem_classes);
        std::copy(seg2.data(), seg2.data() + seg2.size(), segmap.data());
        out = model_.forward(target, segmap);
    }
    Prediction p;
    Tensor disp = slice_plane(out.disps[0]->val, 0);
    p.depth = disp_to_depth(disp, cfg_.net.d_min, cfg_.net.d_max);
    p.sem_prob = slice_plane(out.sem_probs[0]->val, 0);
    p.sem_binary = Tensor(p.sem_prob.shape());
    for (std::int64_t i = 0; i < p.sem_prob.size(); ++i)
        p.sem_binary[i] = p.sem_prob[i] >= 0.5 ? 1.0 : 0.0;
    model_.set_training(true);
    return p;
}

Prediction Trainer::online_refine(const SceneSample& sample, int iterations) {
    Trainer clone(cfg_);
    std::map<std::string, Tensor> state;
    for (auto& [name, t] : state_arrays()) state.emplace(name, t);
    clone.restore_state(state);
    clone.optim_ = AdamOptimizer();  // refinement starts from a fresh optimizer

    SceneSample work = sample;
    if (!sample.has_semantics) {
        // Fix the conditioning label once from the initial prediction.
        Prediction initial = clone.predict(sample);
        work.binary_label = initial.sem_binary;
        work.full_labels.reset();
        work.noisy_label.reset();
        work.has_semantics = true;
        clone.cfg_.enable_srl = false;  // SRL only with a supplied label
        // The self-label is not a supervision target either.
        work.self_labeled = true;
    }
    for (int i = 0; i < iterations; ++i) clone.train_step({&work});
    return clone.predict(work);
}

void Trainer::save_checkpoint(const std::filesystem::path& file_prefix) const {
    auto arrays = state_arrays();
    write_array_archive(file_prefix.string() + ".bin", arrays);
    json manifest;
    manifest["config"] = json::parse(cfg_.to_json_string());
    manifest["epoch"] = epoch_;
    manifest["global_step"] = global_step_;
    std::ostringstream rs;
    rs << rng_;
    manifest["rng_state"] = rs.str();
    std::ofstream out(file_prefix.string() + ".json");
    if (!out) throw std::runtime_error("cannot write checkpoint manifest " + file_prefix.string());
    out << manifest.dump(2) << "\n";
}

Trainer Trainer::load_checkpoint(const std::filesystem::path& file_prefix) {
    std::ifstream in(file_prefix.string() + ".json");
    if (!in) throw std::runtime_error("missing checkpoint manifest: " + file_prefix.string() + ".json");
    const json manifest = json::parse(in);
    Trainer t(TrainConfig::from_json_string(manifest.at("config").dump()));
    t.epoch_ = manifest.value("epoch", 0);
    t.global_step_ = manifest.value("global_step", 0);
    if (manifest.contains("rng_state")) {
        std::istringstream rs(manifest["rng_state"].get<std::string>());
        rs >> t.rng_;
    }
    t.restore_state(read_array_archive(file_prefix.string() + ".bin"));
    return t;
}

std::vector<std::pair<std::string, Tensor>> Trainer::state_arrays() const {
    auto& self = const_cast<Trainer&>(*this);
    std::vector<std::pair<std::string, Tensor>> out;
    ParamRegistry reg = self.model_.params();
    ParamRegistry pose_reg = self.pose_net_.params();
    for (auto& p : pose_reg.params) reg.params.push_back(p);
    for (auto& b : pose_reg.buffers) reg.buffers.push_back(b);
    for (const auto& [name, p] : reg.params) out.emplace_back(name, p->val);
    for (const auto& [name, t] : reg.buffers) out.emplace_back(name, *t);
    for (auto& a : optim_.state_arrays()) out.push_back(std::move(a));
    return out;
}

void Trainer::restore_state(const std::map<std::string, Tensor>& arrays) {
    ParamRegistry reg = model_.params();
    ParamRegistry pose_reg = pose_net_.params();
    for (auto& p : pose_reg.params) reg.params.push_back(p);
    for (auto& b : pose_reg.buffers) reg.buffers.push_back(b);
    for (auto& [name, p] : reg.params) {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw std::runtime_error("checkpoint missing parameter " + name);
        if (!it->second.same_shape(p->val))
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        p->val = it->second;
        p->grad = Tensor();
    }
    for (auto& [name, t] : reg.buffers) {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw std::runtime_error("checkpoint missing buffer " + name);
        *t = it->second;
    }
    optim_.restore_state(arrays);
}

std::uint64_t Trainer::param_hash() const { return hash_arrays(state_arrays()); }

}  // namespace semdepth
