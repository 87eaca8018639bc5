#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "mpmgan/rng.hpp"
#include "mpmgan/tensor.hpp"

namespace mpmgan {

enum class NoiseKind { uniform_pm1, normal01 };

const char* noise_kind_name(NoiseKind k);
NoiseKind noise_kind_from_name(const std::string& name);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::uniform_pm1;
    int dim = 4;

    bool operator==(const NoiseSpec&) const = default;
};

Tensor sample_noise(const NoiseSpec& spec, int batch, Rng& rng);

// Mixture on ℝ² with known component centers; the desk-scale stand-in for
// image datasets. Labels are component indices.
struct SyntheticDataset {
    std::string kind;  // "ring" | "blobs"
    Tensor samples;    // [n x 2]
    std::vector<int> labels;
    std::vector<std::array<double, 2>> centers;
    double sigma = 0.0;

    int k() const { return static_cast<int>(centers.size()); }
    int n() const { return samples.shape()[0]; }
    void export_csv(const std::filesystem::path& path) const;
};

// Modes at angles 2*pi*j/k on the radius circle, isotropic Normal(0, sigma^2).
SyntheticDataset make_ring_mixture(int k, double radius, double sigma, int n, Rng& rng);

SyntheticDataset make_labeled_blobs(const std::vector<std::array<double, 2>>& centers,
                                    double sigma, int n, Rng& rng);

}  // namespace mpmgan
