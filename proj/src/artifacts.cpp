#include "mpmgan/artifacts.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mpmgan/errors.hpp"

namespace mpmgan {

uint64_t fnv1a64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xCBF29CE484222325ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hash_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return buf;
}

void write_run_manifest(const std::filesystem::path& run_dir) {
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name == "manifest.json" || name.empty() || name[0] == '.') continue;
        names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    nlohmann::json files = nlohmann::json::object();
    for (const std::string& name : names) {
        files[name] = hash_file_hex(run_dir / name);
    }
    nlohmann::json manifest;
    manifest["files"] = files;
    std::ofstream out(run_dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + run_dir.string());
    out << manifest.dump(2) << "\n";
}

RunLock::RunLock(const std::filesystem::path& run_dir) {
    const std::filesystem::path lock_path = run_dir / ".mpmgan.lock";
    fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + lock_path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw IoError("run directory " + run_dir.string() +
                      " is locked by another mpmgan command");
    }
}

RunLock::~RunLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

std::string format_g6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

namespace {

std::string fmt_px(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

SvgPlot::SvgPlot(int width, int height, double x_min, double x_max, double y_min,
                 double y_max)
    : width_(width), height_(height), x_min_(x_min), x_max_(x_max), y_min_(y_min),
      y_max_(y_max) {
    if (!(x_max_ > x_min_)) x_max_ = x_min_ + 1.0;
    if (!(y_max_ > y_min_)) y_max_ = y_min_ + 1.0;
}

double SvgPlot::px(double x) const {
    return kMargin + (x - x_min_) / (x_max_ - x_min_) * (width_ - 2 * kMargin);
}

double SvgPlot::py(double y) const {
    return height_ - kMargin - (y - y_min_) / (y_max_ - y_min_) * (height_ - 2 * kMargin);
}

void SvgPlot::polyline(const std::vector<std::pair<double, double>>& pts,
                       const std::string& color, double stroke_width) {
    if (pts.empty()) return;
    body_ += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
             fmt_px(stroke_width) + "\" points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
        if (i) body_ += " ";
        body_ += fmt_px(px(pts[i].first)) + "," + fmt_px(py(pts[i].second));
    }
    body_ += "\"/>\n";
}

void SvgPlot::circle(double x, double y, double radius_px, const std::string& color,
                     bool filled) {
    body_ += "<circle cx=\"" + fmt_px(px(x)) + "\" cy=\"" + fmt_px(py(y)) + "\" r=\"" +
             fmt_px(radius_px) + "\" ";
    if (filled) {
        body_ += "fill=\"" + color + "\"";
    } else {
        body_ += "fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.2\"";
    }
    body_ += "/>\n";
}

void SvgPlot::cross(double x, double y, double half_px, const std::string& color) {
    const double cx = px(x), cy = py(y);
    body_ += "<path stroke=\"" + color + "\" stroke-width=\"1.2\" d=\"M" +
             fmt_px(cx - half_px) + " " + fmt_px(cy - half_px) + " L" + fmt_px(cx + half_px) +
             " " + fmt_px(cy + half_px) + " M" + fmt_px(cx - half_px) + " " +
             fmt_px(cy + half_px) + " L" + fmt_px(cx + half_px) + " " + fmt_px(cy - half_px) +
             "\"/>\n";
}

void SvgPlot::text(double pxv, double pyv, const std::string& s, const std::string& color) {
    body_ += "<text x=\"" + fmt_px(pxv) + "\" y=\"" + fmt_px(pyv) +
             "\" font-family=\"monospace\" font-size=\"11\" fill=\"" + color + "\">" + s +
             "</text>\n";
}

void SvgPlot::axes() {
    const std::string c = "#888";
    body_ += "<path stroke=\"" + c + "\" fill=\"none\" d=\"M" + fmt_px(kMargin) + " " +
             fmt_px(kMargin) + " L" + fmt_px(kMargin) + " " + fmt_px(height_ - kMargin) +
             " L" + fmt_px(width_ - kMargin) + " " + fmt_px(height_ - kMargin) + "\"/>\n";
    text(4, height_ - kMargin + 14, format_g6(x_min_));
    text(width_ - kMargin - 8, height_ - kMargin + 14, format_g6(x_max_));
    text(4, height_ - kMargin - 4, format_g6(y_min_));
    text(4, kMargin + 4, format_g6(y_max_));
}

std::string SvgPlot::render() const {
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(width_) + "\" height=\"" + std::to_string(height_) +
                      "\" viewBox=\"0 0 " + std::to_string(width_) + " " +
                      std::to_string(height_) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    out += body_;
    out += "</svg>\n";
    return out;
}

void SvgPlot::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << render();
}

}  // namespace mpmgan
