#include "mpmgan/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mpmgan/errors.hpp"

namespace mpmgan {

const char* noise_kind_name(NoiseKind k) {
    return k == NoiseKind::uniform_pm1 ? "uniform_pm1" : "normal01";
}

NoiseKind noise_kind_from_name(const std::string& name) {
    if (name == "uniform_pm1") return NoiseKind::uniform_pm1;
    if (name == "normal01") return NoiseKind::normal01;
    throw ConfigError("unknown noise kind \"" + name + "\"");
}

Tensor sample_noise(const NoiseSpec& spec, int batch, Rng& rng) {
    if (batch < 1) throw ConfigError("sample_noise: batch must be >= 1");
    std::vector<double> v(static_cast<size_t>(batch) * spec.dim);
    if (spec.kind == NoiseKind::uniform_pm1) {
        for (double& x : v) x = rng.uniform_pm1();
    } else {
        for (double& x : v) x = rng.normal();
    }
    return Tensor::from_values({batch, spec.dim}, std::move(v));
}

namespace {

SyntheticDataset sample_mixture(std::string kind,
                                std::vector<std::array<double, 2>> centers, double sigma,
                                int n, Rng& rng) {
    const int k = static_cast<int>(centers.size());
    std::vector<double> samples(static_cast<size_t>(n) * 2);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
        int j = static_cast<int>(rng.next_unit() * k);
        if (j >= k) j = k - 1;
        labels[i] = j;
        samples[2 * i] = centers[j][0] + sigma * rng.normal();
        samples[2 * i + 1] = centers[j][1] + sigma * rng.normal();
    }
    SyntheticDataset ds;
    ds.kind = std::move(kind);
    ds.samples = Tensor::from_values({n, 2}, std::move(samples));
    ds.labels = std::move(labels);
    ds.centers = std::move(centers);
    ds.sigma = sigma;
    return ds;
}

}  // namespace

SyntheticDataset make_ring_mixture(int k, double radius, double sigma, int n, Rng& rng) {
    if (k < 1) throw ConfigError("ring_mixture: k must be >= 1");
    if (!(sigma > 0.0)) throw ConfigError("ring_mixture: sigma must be > 0");
    std::vector<std::array<double, 2>> centers(k);
    for (int j = 0; j < k; ++j) {
        const double a = 2.0 * 3.14159265358979323846 * j / k;
        centers[j] = {radius * std::cos(a), radius * std::sin(a)};
    }
    return sample_mixture("ring", std::move(centers), sigma, n, rng);
}

SyntheticDataset make_labeled_blobs(const std::vector<std::array<double, 2>>& centers,
                                    double sigma, int n, Rng& rng) {
    if (centers.empty()) throw ConfigError("labeled_blobs: need at least one center");
    if (!(sigma > 0.0)) throw ConfigError("labeled_blobs: sigma must be > 0");
    return sample_mixture("blobs", centers, sigma, n, rng);
}

void SyntheticDataset::export_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "x0,x1,label\n";
    char buf[96];
    const auto& v = samples.values();
    for (int i = 0; i < n(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%d\n", v[2 * i], v[2 * i + 1], labels[i]);
        out << buf;
    }
}

}  // namespace mpmgan
