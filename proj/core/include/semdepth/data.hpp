#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "semdepth/geometry.hpp"
#include "semdepth/tensor.hpp"

namespace semdepth {

/// Foreground/background split of the semantic categories.
struct CategoryTable {
    std::map<int, std::string> names;  // category id -> name
    std::set<std::string> foreground;
    std::set<std::string> background;

    static const CategoryTable& defaults();
    void validate() const;
    bool is_foreground(int id) const;          // throws naming an unmapped id
    const std::string& name_of(int id) const;  // throws naming an unmapped id
};

/// foreground -> 1, background -> 0.
Tensor binarize_semantics(const Tensor& full_labels, const CategoryTable& table);

/// (H,W) integer ids -> (C,H,W) one-hot. Throws when an id is >= classes.
Tensor one_hot_labels(const Tensor& label, int classes);

struct SceneConfig {
    int width = 192;
    int height = 64;
    int min_objects = 2;
    int max_objects = 6;
    double min_object_depth = 2.0;   // meters
    double max_object_depth = 30.0;
    double backdrop_depth = 40.0;    // fronto-parallel far plane
    double camera_height = 1.5;      // ground plane at y = camera_height
    int noise_radius = 0;            // max per-object label dilation/erosion, pixels
    double motion_translation = 0.15;  // source-frame translation scale, meters
    double motion_rotation = 0.008;    // source-frame rotation scale, radians
};

/// One training example: an (I_{t-1}, I_t, I_{t+1}) triplet with intrinsics
/// and whatever ground truth is available.
struct SceneSample {
    std::array<Tensor, 3> frames;  // prev, target, next; each (3,H,W) in [0,1]
    Intrinsics intrinsics;
    std::optional<DepthMap> gt_depth;      // target frame
    std::optional<Tensor> full_labels;     // (H,W) category ids, target frame
    Tensor binary_label;                   // derived from full_labels via the table
    std::optional<Tensor> noisy_label;     // border-perturbed pseudo-label, when requested
    std::optional<Pose> pose_prev;         // target-cam -> prev-cam transform
    std::optional<Pose> pose_next;
    bool has_semantics = true;   // false when no label map is available
    bool self_labeled = false;   // label came from the model itself; usable for
                                 // conditioning but not as a supervision target

    int height() const { return frames[1].dim(1); }
    int width() const { return frames[1].dim(2); }
    /// Label the trainer sees: the noisy pseudo-label when present.
    const Tensor& training_label() const { return noisy_label ? *noisy_label : binary_label; }
};

/// Renders a textured ground plane, a far backdrop and 2..6 fronto-parallel
/// rectangles at known depths; the source frames view the same scene from
/// slightly moved cameras, so gt depth, poses and photometric consistency
/// agree exactly.
SceneSample generate_synthetic_scene(std::uint64_t seed, const SceneConfig& cfg);

// Synthetic dataset directory layout, one zero-padded directory per scene:
//   NNNNN/img_prev.png img_curr.png img_next.png depth.png (16-bit, m*256)
//   sem_full.png (8-bit ids) sem_binary.png (0/255) intrinsics.txt meta.json
void write_scene(const SceneSample& sample, const std::filesystem::path& dir, std::uint64_t seed);
SceneSample load_scene(const std::filesystem::path& dir);
std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& root);

/// KITTI raw-sync loading. frame_id is "<seq_dir> <index> [l|r]", e.g.
/// "2011_09_26/2011_09_26_drive_0002_sync 69 l". Images are resized to
/// (out_w, out_h) and the intrinsics scaled accordingly; depth (depth_02)
/// and semantic ids (sem_02) are picked up when present.
SceneSample load_kitti_triplet(const std::filesystem::path& root, const std::string& frame_id,
                               int out_w, int out_h);

}  // namespace semdepth
