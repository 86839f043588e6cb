#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "semdepth/nn.hpp"
#include "semdepth/tensor.hpp"

namespace semdepth {

// -- images ------------------------------------------------------------------

Tensor load_image_rgb(const std::filesystem::path& file);              // (3,H,W) in [0,1]
void save_image_rgb(const Tensor& image, const std::filesystem::path& file);
Tensor load_depth_png16(const std::filesystem::path& file);            // (H,W) meters = value/256
void save_depth_png16(const Tensor& depth_m, const std::filesystem::path& file);
Tensor load_label_png8(const std::filesystem::path& file);             // (H,W) integer ids
void save_label_png8(const Tensor& label, const std::filesystem::path& file);
void save_depth_colormap(const Tensor& depth_m, const std::filesystem::path& file);

Tensor resize_image_area(const Tensor& image, int out_h, int out_w);   // (3,H,W)
Tensor resize_nearest(const Tensor& map, int out_h, int out_w);        // (H,W)

// -- named array archive (checkpoints) ---------------------------------------
// Binary layout: magic "SDAR0001", u64 count, then per array:
// u32 name length, name bytes, u32 rank, i32 dims..., f64 payload.
// All integers little-endian.

void write_array_archive(const std::filesystem::path& file,
                         const std::vector<std::pair<std::string, Tensor>>& arrays);
std::map<std::string, Tensor> read_array_archive(const std::filesystem::path& file);

std::uint64_t hash_arrays(const std::vector<std::pair<std::string, Tensor>>& arrays);

// -- run manifests ------------------------------------------------------------

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string code_version;
    std::string created_utc;
};

/// Writes manifest.json into dir (exactly one per artifact directory).
void write_run_manifest(const std::filesystem::path& dir, const RunManifest& m);
RunManifest make_run_manifest(const std::string& command, const std::string& config_text,
                              std::uint64_t seed);

}  // namespace semdepth
