#include "semdepth/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <stdexcept>

#include "semdepth/io.hpp"

namespace semdepth {

const CategoryTable& CategoryTable::defaults() {
    static const CategoryTable table = [] {
        CategoryTable t;
        t.names = {{0, "road"},         {1, "sidewalk"},     {2, "building"}, {3, "wall"},
                   {4, "fence"},        {5, "pole"},         {6, "traffic light"},
                   {7, "traffic sign"}, {8, "vegetation"},   {9, "terrain"},  {10, "sky"},
                   {11, "person"},      {12, "rider"},       {13, "car"},     {14, "truck"},
                   {15, "bus"},         {16, "train"},       {17, "motorcycle"},
                   {18, "bicycle"},     {19, "others"}};
        t.foreground = {"traffic sign", "person", "rider",      "car",          "truck",
                        "bus",          "train",  "motorcycle", "bicycle",      "traffic light"};
        t.background = {"road",  "sidewalk",   "building", "wall", "fence",
                        "pole",  "vegetation", "terrain",  "sky",  "others"};
        t.validate();
        return t;
    }();
    return table;
}

void CategoryTable::validate() const {
    for (const auto& name : foreground)
        if (background.count(name)) throw std::invalid_argument("category table: '" + name + "' in both sets");
    for (const auto& [id, name] : names)
        if (!foreground.count(name) && !background.count(name))
            throw std::invalid_argument("category table: '" + name + "' in neither set");
}

bool CategoryTable::is_foreground(int id) const { return foreground.count(name_of(id)) > 0; }

const std::string& CategoryTable::name_of(int id) const {
    auto it = names.find(id);
    if (it == names.end())
        throw std::invalid_argument("category table: unmapped category id " + std::to_string(id));
    return it->second;
}

Tensor binarize_semantics(const Tensor& full_labels, const CategoryTable& table) {
    if (full_labels.rank() != 2) throw std::invalid_argument("binarize_semantics: (H,W) required");
    Tensor out(full_labels.shape());
    for (std::int64_t i = 0; i < full_labels.size(); ++i)
        out[i] = table.is_foreground(static_cast<int>(full_labels[i])) ? 1.0 : 0.0;
    return out;
}

Tensor one_hot_labels(const Tensor& label, int classes) {
    if (label.rank() != 2) throw std::invalid_argument("one_hot_labels: (H,W) required");
    if (classes < 2) throw std::invalid_argument("one_hot_labels: classes must be >= 2");
    const int h = label.dim(0), w = label.dim(1);
    Tensor out({classes, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int id = static_cast<int>(label.at(y, x));
            if (id < 0 || id >= classes)
                throw std::invalid_argument("one_hot_labels: id " + std::to_string(id) +
                                            " outside [0," + std::to_string(classes) + ")");
            out.at(id, y, x) = 1.0;
        }
    return out;
}

// -- synthetic scene rendering -------------------------------------------------

namespace {

double hash01(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    std::uint64_t x = a * 0x9E3779B97F4A7C15ull ^ b * 0xBF58476D1CE4E5B9ull ^
                      c * 0x94D049BB133111EBull ^ d * 0xD6E8FEB86659FD93ull;
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return static_cast<double>(x >> 11) * (1.0 / 9007199254740992.0);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Smooth value noise on a per-surface integer lattice.
double value_noise(double u, double v, std::uint64_t surf, std::uint64_t octave, std::uint64_t seed) {
    const double fu = std::floor(u), fv = std::floor(v);
    const auto iu = static_cast<std::int64_t>(fu), iv = static_cast<std::int64_t>(fv);
    const double tu = smoothstep(u - fu), tv = smoothstep(v - fv);
    auto lat = [&](std::int64_t du, std::int64_t dv) {
        return hash01(static_cast<std::uint64_t>(iu + du) * 2654435761ull + 0x1234,
                      static_cast<std::uint64_t>(iv + dv) * 40503ull + 0x5678, surf * 131 + octave, seed);
    };
    const double a = lat(0, 0) * (1 - tu) + lat(1, 0) * tu;
    const double b = lat(0, 1) * (1 - tu) + lat(1, 1) * tu;
    return a * (1 - tv) + b * tv;
}

struct SurfaceTexture {
    double base[3];
    double freq0;   // lattice cells per meter
    double ramp_u, ramp_v, ramp_freq;
    std::uint64_t id;
    std::uint64_t seed;

    void shade(double u, double v, double* rgb) const {
        const double n0 = value_noise(u * freq0, v * freq0, id, 0, seed);
        const double n1 = value_noise(u * freq0 * 2.3, v * freq0 * 2.3, id, 1, seed);
        const double ramp = 0.5 + 0.5 * std::sin(2.0 * M_PI * ramp_freq * (ramp_u * u + ramp_v * v));
        const double s = 0.35 + 0.38 * n0 + 0.17 * n1 + 0.18 * ramp;
        for (int c = 0; c < 3; ++c) rgb[c] = std::min(std::max(base[c] * s, 0.0), 1.0);
    }
};

void hsv_to_rgb(double h, double s, double v, double* rgb) {
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    rgb[0] = r + (v - c);
    rgb[1] = g + (v - c);
    rgb[2] = b + (v - c);
}

struct RectObject {
    double z;                    // depth of the fronto-parallel plane, meters
    double x0, x1, y0, y1;       // world-space extents
    int category;
    SurfaceTexture tex;
};

struct World {
    std::vector<RectObject> rects;
    SurfaceTexture ground, backdrop;
    double camera_height;
    double backdrop_depth;
};

// Casts the pixel ray of a camera with world-to-camera pose (r, t) and
// returns depth along the camera z plus the shaded color. surface_index:
// -1 ground, -2 backdrop, >= 0 rectangle.
void trace(const World& world, const Intrinsics& k, const Eigen::Matrix3d& r,
           const Eigen::Vector3d& t, int px, int py, double* rgb, double& depth, int& surface_index) {
    const Eigen::Vector3d ray_cam((px - k.cx) / k.fx, (py - k.cy) / k.fy, 1.0);
    const Eigen::Matrix3d rt = r.transpose();
    const Eigen::Vector3d origin = -rt * t;
    const Eigen::Vector3d dir = rt * ray_cam;

    double best = world.backdrop_depth;
    if (dir.z() > 1e-9) {
        const double lam = (world.backdrop_depth - origin.z()) / dir.z();
        best = lam;
    }
    surface_index = -2;
    // Ground plane y = camera_height.
    if (dir.y() > 1e-9) {
        const double lam = (world.camera_height - origin.y()) / dir.y();
        if (lam > 0 && lam < best) {
            best = lam;
            surface_index = -1;
        }
    }
    for (size_t i = 0; i < world.rects.size(); ++i) {
        const RectObject& o = world.rects[i];
        if (std::abs(dir.z()) < 1e-12) continue;
        const double lam = (o.z - origin.z()) / dir.z();
        if (lam <= 0 || lam >= best) continue;
        const Eigen::Vector3d p = origin + lam * dir;
        if (p.x() >= o.x0 && p.x() <= o.x1 && p.y() >= o.y0 && p.y() <= o.y1) {
            best = lam;
            surface_index = static_cast<int>(i);
        }
    }
    depth = best;
    const Eigen::Vector3d hit = origin + best * dir;
    if (surface_index >= 0) {
        const RectObject& o = world.rects[static_cast<size_t>(surface_index)];
        o.tex.shade(hit.x() - o.x0, hit.y() - o.y0, rgb);
    } else if (surface_index == -1) {
        world.ground.shade(hit.x(), hit.z(), rgb);
    } else {
        world.backdrop.shade(hit.x(), hit.y(), rgb);
    }
}

Tensor render_frame(const World& world, const Intrinsics& k, const Pose& world_to_cam,
                    Tensor* depth_out, Tensor* object_out) {
    Tensor img({3, k.height, k.width});
    for (int y = 0; y < k.height; ++y)
        for (int x = 0; x < k.width; ++x) {
            double rgb[3];
            double depth;
            int surf;
            trace(world, k, world_to_cam.rotation, world_to_cam.translation, x, y, rgb, depth, surf);
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = rgb[c];
            if (depth_out) depth_out->at(y, x) = depth;
            if (object_out) object_out->at(y, x) = surf;
        }
    return img;
}

Tensor morph_binary(const Tensor& mask, int radius, bool dilate) {
    Tensor cur = mask;
    const int h = mask.dim(0), w = mask.dim(1);
    for (int it = 0; it < radius; ++it) {
        Tensor next({h, w});
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = dilate ? 0.0 : 1.0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        const double s =
                            (yy >= 0 && yy < h && xx >= 0 && xx < w) ? cur.at(yy, xx) : 0.0;
                        v = dilate ? std::max(v, s) : std::min(v, s);
                    }
                next.at(y, x) = v;
            }
        cur = std::move(next);
    }
    return cur;
}

// Foreground categories the generated objects cycle through.
constexpr int kObjectCategories[] = {13, 11, 14, 7, 15, 12, 18, 6};

}  // namespace

SceneSample generate_synthetic_scene(std::uint64_t seed, const SceneConfig& cfg) {
    if (cfg.width < 16 || cfg.height < 16) throw std::invalid_argument("scene config: image too small");
    if (cfg.min_objects < 0 || cfg.min_objects > cfg.max_objects)
        throw std::invalid_argument("scene config: bad object count range");
    if (!(cfg.min_object_depth > 0.0) || cfg.min_object_depth >= cfg.max_object_depth ||
        cfg.max_object_depth >= cfg.backdrop_depth)
        throw std::invalid_argument("scene config: require 0 < min < max object depth < backdrop");

    std::mt19937_64 rng(seed);
    auto uni = [&rng](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };

    Intrinsics k{0.9 * cfg.width, 0.9 * cfg.width, cfg.width / 2.0, cfg.height / 2.0,
                 cfg.width, cfg.height};
    k.validate();

    World world;
    world.camera_height = cfg.camera_height;
    world.backdrop_depth = cfg.backdrop_depth;
    world.ground = {{0.48, 0.44, 0.40}, k.fx / (8.0 * 12.0), 0.35, 0.35, 0.06, 1001, seed};
    world.backdrop = {{0.55, 0.60, 0.70}, k.fx / (6.0 * cfg.backdrop_depth), 0.9, 0.2,
                      0.5 / cfg.backdrop_depth, 1002, seed};

    const int n_objects =
        std::uniform_int_distribution<int>(cfg.min_objects, cfg.max_objects)(rng);
    for (int i = 0; i < n_objects; ++i) {
        RectObject o;
        o.z = uni(cfg.min_object_depth, cfg.max_object_depth);
        const double ucenter = uni(0.12, 0.88) * cfg.width;
        const double vcenter = uni(0.22, 0.82) * cfg.height;
        const double half_w_px = uni(0.09, 0.19) * cfg.width;
        const double half_h_px = uni(0.16, 0.36) * cfg.height;
        const double xc = (ucenter - k.cx) / k.fx * o.z;
        const double yc = (vcenter - k.cy) / k.fy * o.z;
        o.x0 = xc - half_w_px * o.z / k.fx;
        o.x1 = xc + half_w_px * o.z / k.fx;
        o.y0 = yc - half_h_px * o.z / k.fy;
        o.y1 = yc + half_h_px * o.z / k.fy;
        o.category = kObjectCategories[i % (sizeof(kObjectCategories) / sizeof(int))];
        const double hue = std::fmod(0.13 + 0.618033988749895 * i, 1.0);
        SurfaceTexture tex;
        hsv_to_rgb(hue, 0.75, 0.65 + 0.3 * hash01(seed, static_cast<std::uint64_t>(i), 7, 9), tex.base);
        tex.freq0 = k.fx / (5.0 * o.z);  // ~5 px lattice cells in the target view
        tex.ramp_u = uni(-1.0, 1.0);
        tex.ramp_v = uni(-1.0, 1.0);
        tex.ramp_freq = k.fx / (14.0 * o.z);
        tex.id = 2000 + static_cast<std::uint64_t>(i);
        tex.seed = seed;
        o.tex = tex;
        world.rects.push_back(o);
    }

    // Source-camera motion: mostly lateral, opposite signs for prev/next.
    auto draw_motion = [&](double sign) {
        Eigen::Vector3d t(sign * uni(0.6, 1.0) * cfg.motion_translation,
                          uni(-0.2, 0.2) * cfg.motion_translation,
                          uni(-0.4, 0.4) * cfg.motion_translation);
        Eigen::Vector3d w(uni(-1.0, 1.0) * cfg.motion_rotation,
                          uni(-1.0, 1.0) * cfg.motion_rotation,
                          uni(-1.0, 1.0) * cfg.motion_rotation);
        return se3_exp(w, t);
    };
    const Pose pose_prev = draw_motion(-1.0);
    const Pose pose_next = draw_motion(+1.0);

    SceneSample s;
    s.intrinsics = k;
    Tensor depth({cfg.height, cfg.width});
    Tensor objects({cfg.height, cfg.width});
    s.frames[1] = render_frame(world, k, Pose{}, &depth, &objects);
    s.frames[0] = render_frame(world, k, pose_prev, nullptr, nullptr);
    s.frames[2] = render_frame(world, k, pose_next, nullptr, nullptr);
    s.gt_depth = DepthMap{std::move(depth)};
    s.pose_prev = pose_prev;
    s.pose_next = pose_next;

    Tensor full({cfg.height, cfg.width});
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
            const int surf = static_cast<int>(objects.at(y, x));
            full.at(y, x) = surf >= 0 ? world.rects[static_cast<size_t>(surf)].category
                                      : (surf == -1 ? 0 /*road*/ : 2 /*building*/);
        }
    s.full_labels = full;
    s.binary_label = binarize_semantics(full, CategoryTable::defaults());

    if (cfg.noise_radius > 0) {
        Tensor noisy(Shape{cfg.height, cfg.width});
        for (int i = 0; i < n_objects; ++i) {
            Tensor obj_mask({cfg.height, cfg.width});
            for (std::int64_t p = 0; p < objects.size(); ++p)
                obj_mask[p] = objects[p] == i ? 1.0 : 0.0;
            const int radius = std::uniform_int_distribution<int>(0, cfg.noise_radius)(rng);
            const bool dilate = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
            if (radius > 0) obj_mask = morph_binary(obj_mask, radius, dilate);
            for (std::int64_t p = 0; p < noisy.size(); ++p)
                noisy[p] = std::max(noisy[p], obj_mask[p]);
        }
        s.noisy_label = std::move(noisy);
    }
    return s;
}

// -- dataset directories -------------------------------------------------------

namespace {
nlohmann::json pose_to_json(const Pose& p) {
    nlohmann::json j;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) j["rotation"].push_back(p.rotation(r, c));
    for (int i = 0; i < 3; ++i) j["translation"].push_back(p.translation(i));
    return j;
}

Pose pose_from_json(const nlohmann::json& j) {
    Pose p;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) p.rotation(r, c) = j.at("rotation").at(r * 3 + c).get<double>();
    for (int i = 0; i < 3; ++i) p.translation(i) = j.at("translation").at(i).get<double>();
    return p;
}
}  // namespace

void write_scene(const SceneSample& sample, const std::filesystem::path& dir, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    save_image_rgb(sample.frames[0], dir / "img_prev.png");
    save_image_rgb(sample.frames[1], dir / "img_curr.png");
    save_image_rgb(sample.frames[2], dir / "img_next.png");
    if (sample.gt_depth) save_depth_png16(sample.gt_depth->values, dir / "depth.png");
    if (sample.full_labels) save_label_png8(*sample.full_labels, dir / "sem_full.png");
    Tensor binary_vis(sample.training_label().shape());
    for (std::int64_t i = 0; i < binary_vis.size(); ++i)
        binary_vis[i] = sample.training_label()[i] != 0.0 ? 255.0 : 0.0;
    save_label_png8(binary_vis, dir / "sem_binary.png");
    save_intrinsics(sample.intrinsics, dir / "intrinsics.txt");

    nlohmann::json meta;
    meta["seed"] = seed;
    if (sample.pose_prev) meta["pose_prev"] = pose_to_json(*sample.pose_prev);
    if (sample.pose_next) meta["pose_next"] = pose_to_json(*sample.pose_next);
    meta["has_noisy_label"] = sample.noisy_label.has_value();
    std::ofstream out(dir / "meta.json");
    if (!out) throw std::runtime_error("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << "\n";
}

SceneSample load_scene(const std::filesystem::path& dir) {
    SceneSample s;
    s.frames[0] = load_image_rgb(dir / "img_prev.png");
    s.frames[1] = load_image_rgb(dir / "img_curr.png");
    s.frames[2] = load_image_rgb(dir / "img_next.png");
    s.intrinsics = load_intrinsics(dir / "intrinsics.txt");
    if (std::filesystem::exists(dir / "depth.png"))
        s.gt_depth = DepthMap{load_depth_png16(dir / "depth.png")};
    if (std::filesystem::exists(dir / "sem_full.png")) {
        s.full_labels = load_label_png8(dir / "sem_full.png");
        s.binary_label = binarize_semantics(*s.full_labels, CategoryTable::defaults());
    }
    Tensor binary_raw = load_label_png8(dir / "sem_binary.png");
    Tensor binary(binary_raw.shape());
    for (std::int64_t i = 0; i < binary_raw.size(); ++i) binary[i] = binary_raw[i] > 127 ? 1.0 : 0.0;
    if (!s.full_labels) {
        s.binary_label = binary;
    } else {
        // sem_binary.png carries the (possibly noise-perturbed) training label.
        bool same = true;
        for (std::int64_t i = 0; i < binary.size() && same; ++i)
            same = binary[i] == s.binary_label[i];
        if (!same) s.noisy_label = std::move(binary);
    }
    std::ifstream meta_in(dir / "meta.json");
    if (meta_in) {
        nlohmann::json meta = nlohmann::json::parse(meta_in);
        if (meta.contains("pose_prev")) s.pose_prev = pose_from_json(meta["pose_prev"]);
        if (meta.contains("pose_next")) s.pose_next = pose_from_json(meta["pose_next"]);
    }
    return s;
}

std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root))
        throw std::runtime_error("dataset root does not exist: " + root.string());
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory() && std::filesystem::exists(e.path() / "img_curr.png"))
            dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

// -- KITTI -----------------------------------------------------------------------

namespace {
std::string frame_file(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%010d.png", index);
    return buf;
}
}  // namespace

SceneSample load_kitti_triplet(const std::filesystem::path& root, const std::string& frame_id,
                               int out_w, int out_h) {
    std::istringstream is(frame_id);
    std::string seq, side = "l";
    int index = -1;
    is >> seq >> index;
    is >> side;
    if (seq.empty() || index < 0)
        throw std::runtime_error("bad KITTI frame id '" + frame_id + "', expected '<seq> <index> [l|r]'");
    const std::string cam = side == "r" ? "image_03" : "image_02";
    const std::string depth_dir = side == "r" ? "depth_03" : "depth_02";
    const std::string sem_dir = side == "r" ? "sem_03" : "sem_02";

    SceneSample s;
    const int ids[3] = {index - 1, index, index + 1};
    Intrinsics native{};
    for (int f = 0; f < 3; ++f) {
        const auto path = root / seq / cam / "data" / frame_file(ids[f]);
        if (!std::filesystem::exists(path))
            throw std::runtime_error("missing KITTI image: " + path.string());
        Tensor img = load_image_rgb(path);
        if (f == 0) {
            native = Intrinsics{0.58 * img.dim(2), 1.92 * img.dim(1), 0.5 * img.dim(2),
                                0.5 * img.dim(1), img.dim(2), img.dim(1)};
            for (const auto& cand : {root / seq / "intrinsics.txt", root / "intrinsics.txt"})
                if (std::filesystem::exists(cand)) {
                    native = load_intrinsics(cand);
                    break;
                }
        }
        s.frames[static_cast<size_t>(f)] = resize_image_area(img, out_h, out_w);
    }
    s.intrinsics = native.scaled(out_w, out_h);

    const auto depth_path = root / seq / depth_dir / "data" / frame_file(index);
    if (std::filesystem::exists(depth_path))
        s.gt_depth = DepthMap{resize_nearest(load_depth_png16(depth_path), out_h, out_w)};
    const auto sem_path = root / seq / sem_dir / "data" / frame_file(index);
    if (std::filesystem::exists(sem_path)) {
        s.full_labels = resize_nearest(load_label_png8(sem_path), out_h, out_w);
        s.binary_label = binarize_semantics(*s.full_labels, CategoryTable::defaults());
    } else {
        s.binary_label = Tensor({out_h, out_w});
        s.has_semantics = false;
    }
    return s;
}

}  // namespace semdepth
