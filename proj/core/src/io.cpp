#include "semdepth/io.hpp"

#include <chrono>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

namespace semdepth {

namespace {

cv::Mat require_load(const std::filesystem::path& file, int flags) {
    cv::Mat m = cv::imread(file.string(), flags);
    if (m.empty()) throw std::runtime_error("cannot read image: " + file.string());
    return m;
}

void require_write(const Tensor&, const std::filesystem::path& file, const cv::Mat& m) {
    std::filesystem::create_directories(file.parent_path().empty() ? "." : file.parent_path());
    if (!cv::imwrite(file.string(), m)) throw std::runtime_error("cannot write image: " + file.string());
}

}  // namespace

Tensor load_image_rgb(const std::filesystem::path& file) {
    cv::Mat bgr = require_load(file, cv::IMREAD_COLOR);
    Tensor t({3, bgr.rows, bgr.cols});
    for (int y = 0; y < bgr.rows; ++y)
        for (int x = 0; x < bgr.cols; ++x) {
            const cv::Vec3b px = bgr.at<cv::Vec3b>(y, x);
            t.at(0, y, x) = px[2] / 255.0;
            t.at(1, y, x) = px[1] / 255.0;
            t.at(2, y, x) = px[0] / 255.0;
        }
    return t;
}

void save_image_rgb(const Tensor& image, const std::filesystem::path& file) {
    if (image.rank() != 3 || image.dim(0) != 3) throw std::invalid_argument("save_image_rgb: (3,H,W) required");
    cv::Mat bgr(image.dim(1), image.dim(2), CV_8UC3);
    for (int y = 0; y < bgr.rows; ++y)
        for (int x = 0; x < bgr.cols; ++x) {
            auto q = [&](int c) {
                return cv::saturate_cast<uchar>(std::lround(image.at(c, y, x) * 255.0));
            };
            bgr.at<cv::Vec3b>(y, x) = cv::Vec3b(q(2), q(1), q(0));
        }
    require_write(image, file, bgr);
}

Tensor load_depth_png16(const std::filesystem::path& file) {
    cv::Mat raw = require_load(file, cv::IMREAD_UNCHANGED);
    if (raw.type() != CV_16UC1) throw std::runtime_error("depth png must be 16-bit grayscale: " + file.string());
    Tensor t({raw.rows, raw.cols});
    for (int y = 0; y < raw.rows; ++y)
        for (int x = 0; x < raw.cols; ++x) t.at(y, x) = raw.at<std::uint16_t>(y, x) / 256.0;
    return t;
}

void save_depth_png16(const Tensor& depth_m, const std::filesystem::path& file) {
    if (depth_m.rank() != 2) throw std::invalid_argument("save_depth_png16: (H,W) required");
    cv::Mat raw(depth_m.dim(0), depth_m.dim(1), CV_16UC1);
    for (int y = 0; y < raw.rows; ++y)
        for (int x = 0; x < raw.cols; ++x)
            raw.at<std::uint16_t>(y, x) =
                cv::saturate_cast<std::uint16_t>(std::lround(depth_m.at(y, x) * 256.0));
    require_write(depth_m, file, raw);
}

Tensor load_label_png8(const std::filesystem::path& file) {
    cv::Mat raw = require_load(file, cv::IMREAD_GRAYSCALE);
    Tensor t({raw.rows, raw.cols});
    for (int y = 0; y < raw.rows; ++y)
        for (int x = 0; x < raw.cols; ++x) t.at(y, x) = raw.at<uchar>(y, x);
    return t;
}

void save_label_png8(const Tensor& label, const std::filesystem::path& file) {
    if (label.rank() != 2) throw std::invalid_argument("save_label_png8: (H,W) required");
    cv::Mat raw(label.dim(0), label.dim(1), CV_8UC1);
    for (int y = 0; y < raw.rows; ++y)
        for (int x = 0; x < raw.cols; ++x)
            raw.at<uchar>(y, x) = cv::saturate_cast<uchar>(std::lround(label.at(y, x)));
    require_write(label, file, raw);
}

void save_depth_colormap(const Tensor& depth_m, const std::filesystem::path& file) {
    if (depth_m.rank() != 2) throw std::invalid_argument("save_depth_colormap: (H,W) required");
    // Inverse depth rendering: near is bright, like the usual disparity maps.
    cv::Mat gray(depth_m.dim(0), depth_m.dim(1), CV_8UC1);
    double lo = 1e30, hi = 0;
    for (std::int64_t i = 0; i < depth_m.size(); ++i) {
        const double inv = 1.0 / std::max(depth_m[i], 1e-6);
        lo = std::min(lo, inv);
        hi = std::max(hi, inv);
    }
    const double span = std::max(hi - lo, 1e-12);
    for (int y = 0; y < gray.rows; ++y)
        for (int x = 0; x < gray.cols; ++x) {
            const double inv = 1.0 / std::max(depth_m.at(y, x), 1e-6);
            gray.at<uchar>(y, x) = cv::saturate_cast<uchar>(255.0 * (inv - lo) / span);
        }
    cv::Mat color;
    cv::applyColorMap(gray, color, cv::COLORMAP_MAGMA);
    require_write(depth_m, file, color);
}

Tensor resize_image_area(const Tensor& image, int out_h, int out_w) {
    if (image.rank() != 3) throw std::invalid_argument("resize_image_area: (C,H,W) required");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    if (h == out_h && w == out_w) return image;
    Tensor out({c, out_h, out_w});
    const int interp = (out_w < w || out_h < h) ? cv::INTER_AREA : cv::INTER_LINEAR;
    for (int ci = 0; ci < c; ++ci) {
        cv::Mat plane(h, w, CV_64FC1, const_cast<double*>(image.data()) + static_cast<std::int64_t>(ci) * h * w);
        cv::Mat resized;
        cv::resize(plane, resized, cv::Size(out_w, out_h), 0, 0, interp);
        std::memcpy(out.data() + static_cast<std::int64_t>(ci) * out_h * out_w, resized.ptr<double>(),
                    sizeof(double) * out_h * out_w);
    }
    return out;
}

Tensor resize_nearest(const Tensor& map, int out_h, int out_w) {
    if (map.rank() != 2) throw std::invalid_argument("resize_nearest: (H,W) required");
    const int h = map.dim(0), w = map.dim(1);
    if (h == out_h && w == out_w) return map;
    Tensor out({out_h, out_w});
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            const int sy = std::min(static_cast<int>(static_cast<std::int64_t>(y) * h / out_h), h - 1);
            const int sx = std::min(static_cast<int>(static_cast<std::int64_t>(x) * w / out_w), w - 1);
            out.at(y, x) = map.at(sy, sx);
        }
    return out;
}

// -- archive -------------------------------------------------------------------

namespace {
constexpr char kArchiveMagic[8] = {'S', 'D', 'A', 'R', '0', '0', '0', '1'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("array archive truncated");
    return v;
}
}  // namespace

void write_array_archive(const std::filesystem::path& file,
                         const std::vector<std::pair<std::string, Tensor>>& arrays) {
    if (!file.parent_path().empty()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write archive: " + file.string());
    out.write(kArchiveMagic, sizeof(kArchiveMagic));
    write_pod<std::uint64_t>(out, arrays.size());
    for (const auto& [name, t] : arrays) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) write_pod<std::int32_t>(out, t.dim(i));
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(sizeof(double) * t.size()));
    }
    if (!out) throw std::runtime_error("archive write failed: " + file.string());
}

std::map<std::string, Tensor> read_array_archive(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open archive: " + file.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kArchiveMagic, 8) != 0)
        throw std::runtime_error("bad archive magic: " + file.string());
    const auto count = read_pod<std::uint64_t>(in);
    std::map<std::string, Tensor> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = read_pod<std::uint32_t>(in);
        Shape shape(rank);
        for (auto& d : shape) d = read_pod<std::int32_t>(in);
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(sizeof(double) * t.size()));
        if (!in) throw std::runtime_error("array archive truncated: " + file.string());
        out.emplace(std::move(name), std::move(t));
    }
    return out;
}

std::uint64_t hash_arrays(const std::vector<std::pair<std::string, Tensor>>& arrays) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix_bytes = [&h](const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& [name, t] : arrays) {
        mix_bytes(name.data(), name.size());
        mix_bytes(t.data(), sizeof(double) * static_cast<size_t>(t.size()));
    }
    return h;
}

// -- manifests -------------------------------------------------------------------

void write_run_manifest(const std::filesystem::path& dir, const RunManifest& m) {
    std::filesystem::create_directories(dir);
    nlohmann::json j{{"command", m.command},
                     {"config_hash", m.config_hash},
                     {"seed", m.seed},
                     {"code_version", m.code_version},
                     {"created_utc", m.created_utc}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    out << j.dump(2) << "\n";
}

RunManifest make_run_manifest(const std::string& command, const std::string& config_text,
                              std::uint64_t seed) {
    RunManifest m;
    m.command = command;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash_arrays(
                      {{config_text, Tensor::scalar(static_cast<double>(config_text.size()))}})));
    m.config_hash = buf;
    m.seed = seed;
    m.code_version = "semdepth 0.1.0";
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char ts[32];
    std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    m.created_utc = ts;
    return m;
}

}  // namespace semdepth
