#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mpmgan {

// FNV-1a over file bytes, hex-encoded; used for the run-manifest content hashes.
uint64_t fnv1a64(const void* data, size_t len);
std::string hash_file_hex(const std::filesystem::path& path);

// Rewrites <run_dir>/manifest.json listing every regular file (sorted, dotfiles
// and the manifest itself excluded) with its content hash.
void write_run_manifest(const std::filesystem::path& run_dir);

// Advisory per-run-directory lock (flock); released on destruction or process
// exit. Throws when another mpmgan command holds the directory.
class RunLock {
  public:
    explicit RunLock(const std::filesystem::path& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

  private:
    int fd_ = -1;
};

// Minimal deterministic SVG chart writer: fixed-point pixel coordinates, no
// timestamps, byte-identical output for identical input.
class SvgPlot {
  public:
    SvgPlot(int width, int height, double x_min, double x_max, double y_min, double y_max);

    void polyline(const std::vector<std::pair<double, double>>& pts,
                  const std::string& color, double stroke_width = 1.0);
    void circle(double x, double y, double radius_px, const std::string& color,
                bool filled = true);
    void cross(double x, double y, double half_px, const std::string& color);
    void text(double px, double py, const std::string& s, const std::string& color = "#333");
    void axes();

    std::string render() const;
    void save(const std::filesystem::path& path) const;

    double px(double x) const;
    double py(double y) const;

  private:
    int width_, height_;
    double x_min_, x_max_, y_min_, y_max_;
    static constexpr int kMargin = 42;
    std::string body_;
};

std::string format_g6(double v);

}  // namespace mpmgan
