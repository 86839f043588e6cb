#include "semdepth/geometry.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace semdepth {

void Intrinsics::validate() const {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("intrinsics: image size must be positive");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height)
        throw std::invalid_argument("intrinsics: principal point outside image");
}

Intrinsics Intrinsics::scaled(int new_width, int new_height) const {
    const double sx = static_cast<double>(new_width) / width;
    const double sy = static_cast<double>(new_height) / height;
    return {fx * sx, fy * sy, cx * sx, cy * sy, new_width, new_height};
}

Intrinsics load_intrinsics(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open intrinsics file: " + file.string());
    std::map<std::string, double> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        for (char& c : line)
            if (c == '=' || c == ':') c = ' ';
        std::istringstream ls(line);
        std::string key;
        double value;
        if (ls >> key >> value) kv[key] = value;
    }
    for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"})
        if (!kv.count(key))
            throw std::runtime_error("intrinsics file " + file.string() + " missing key: " + key);
    Intrinsics k{kv["fx"], kv["fy"], kv["cx"], kv["cy"],
                 static_cast<int>(kv["width"]), static_cast<int>(kv["height"])};
    k.validate();
    return k;
}

void save_intrinsics(const Intrinsics& k, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write intrinsics file: " + file.string());
    out.precision(17);
    out << "fx " << k.fx << "\nfy " << k.fy << "\ncx " << k.cx << "\ncy " << k.cy
        << "\nwidth " << k.width << "\nheight " << k.height << "\n";
}

void Pose::validate(double tol) const {
    const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > tol) throw std::invalid_argument("pose: rotation not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > tol) throw std::invalid_argument("pose: det(R) != 1");
}

Pose Pose::inverse() const {
    Pose p;
    p.rotation = rotation.transpose();
    p.translation = -p.rotation * translation;
    return p;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
    const double theta2 = w.squaredNorm();
    const Eigen::Matrix3d k = skew(w);
    double a, b;  // R = I + a*K + b*K^2
    if (theta2 < 1e-16) {
        a = 1.0 - theta2 / 6.0;
        b = 0.5 - theta2 / 24.0;
    } else {
        const double theta = std::sqrt(theta2);
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& w) {
    const double theta2 = w.squaredNorm();
    const Eigen::Matrix3d k = skew(w);
    double a, b;  // J_r = I - a*K + b*K^2
    if (theta2 < 1e-16) {
        a = 0.5 - theta2 / 24.0;
        b = 1.0 / 6.0 - theta2 / 120.0;
    } else {
        const double theta = std::sqrt(theta2);
        a = (1.0 - std::cos(theta)) / theta2;
        b = (theta - std::sin(theta)) / (theta2 * theta);
    }
    return Eigen::Matrix3d::Identity() - a * k + b * k * k;
}

Pose se3_exp(const Eigen::Vector3d& axis_angle, const Eigen::Vector3d& translation) {
    if (!axis_angle.allFinite() || !translation.allFinite())
        throw std::invalid_argument("se3_exp: non-finite input");
    Pose p;
    p.rotation = so3_exp(axis_angle);
    p.translation = translation;
    return p;
}

Tensor backproject(const DepthMap& depth, const Intrinsics& k) {
    k.validate();
    const int h = depth.height(), w = depth.width();
    Tensor points({3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double d = depth.values.at(y, x);
            if (!(d > 0)) throw std::invalid_argument("backproject: non-positive depth");
            points.at(0, y, x) = d * (x - k.cx) / k.fx;
            points.at(1, y, x) = d * (y - k.cy) / k.fy;
            points.at(2, y, x) = d;
        }
    }
    return points;
}

Tensor project(const Tensor& points, const Intrinsics& k, const Pose& t) {
    if (points.rank() != 3 || points.dim(0) != 3) throw std::invalid_argument("project: (3,H,W) input required");
    const int h = points.dim(1), w = points.dim(2);
    Tensor grid({2, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Eigen::Vector3d p(points.at(0, y, x), points.at(1, y, x), points.at(2, y, x));
            const Eigen::Vector3d q = t.rotation * p + t.translation;
            const double z = std::max(q.z(), kMinProjectionDepth);
            grid.at(0, y, x) = k.fx * q.x() / z + k.cx;
            grid.at(1, y, x) = k.fy * q.y() / z + k.cy;
        }
    }
    return grid;
}

WarpResult warp_bilinear(const Tensor& source, const Tensor& grid) {
    if (source.rank() != 3) throw std::invalid_argument("warp_bilinear: (C,H,W) source required");
    if (grid.rank() != 3 || grid.dim(0) != 2) throw std::invalid_argument("warp_bilinear: (2,H,W) grid required");
    const int c = source.dim(0), h = source.dim(1), w = source.dim(2);
    const int gh = grid.dim(1), gw = grid.dim(2);
    WarpResult r{Tensor({c, gh, gw}), Tensor({gh, gw})};
    for (int y = 0; y < gh; ++y) {
        for (int x = 0; x < gw; ++x) {
            const double gx = grid.at(0, y, x), gy = grid.at(1, y, x);
            if (!(gx >= 0 && gx <= w - 1 && gy >= 0 && gy <= h - 1)) continue;
            r.mask.at(y, x) = 1.0;
            const int x0 = static_cast<int>(std::floor(gx)), y0 = static_cast<int>(std::floor(gy));
            const double wx = gx - x0, wy = gy - y0;
            // The +1 neighbor collapses onto x0/y0 at the exact far edge, where
            // its bilinear weight is zero.
            const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
            for (int ci = 0; ci < c; ++ci) {
                const double v00 = source.at(ci, y0, x0), v01 = source.at(ci, y0, x1);
                const double v10 = source.at(ci, y1, x0), v11 = source.at(ci, y1, x1);
                r.image.at(ci, y, x) = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                       wy * ((1 - wx) * v10 + wx * v11);
            }
        }
    }
    return r;
}

Tensor identity_grid(int height, int width) {
    Tensor g({2, height, width});
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            g.at(0, y, x) = x;
            g.at(1, y, x) = y;
        }
    return g;
}

DepthMap disp_to_depth(const Tensor& sigmoid_disp, double d_min, double d_max) {
    if (d_min >= d_max) throw std::invalid_argument("disp_to_depth: d_min must be < d_max");
    if (d_min <= 0) throw std::invalid_argument("disp_to_depth: d_min must be positive");
    const double min_disp = 1.0 / d_max, max_disp = 1.0 / d_min;
    DepthMap d{Tensor(sigmoid_disp.shape())};
    for (std::int64_t i = 0; i < sigmoid_disp.size(); ++i)
        d.values[i] = 1.0 / (min_disp + (max_disp - min_disp) * sigmoid_disp[i]);
    return d;
}

}  // namespace semdepth
