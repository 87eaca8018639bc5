#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpmgan/data.hpp"
#include "mpmgan/trainer.hpp"

namespace mpmgan {

struct ModeCoverageReport {
    int k = 0;
    int n_samples = 0;
    double min_fraction = 0.0;
    int modes_covered = 0;
    std::vector<double> per_mode_fraction;  // within-3-sigma mass per nearest mode
    std::vector<int> covered_modes;
    double high_quality_fraction = 0.0;
};

// A mode counts as covered when >= min_fraction of the samples land within
// 3 sigma of its center; samples assign to their nearest center only.
ModeCoverageReport mode_coverage(const Tensor& samples, const SyntheticDataset& dataset,
                                 double min_fraction);

enum class FeatureSource { discriminator_penultimate, message_generator, concatenated };

const char* feature_source_name(FeatureSource s);

struct FeatureMatrix {
    Tensor features;  // [n x f]
    FeatureSource source = FeatureSource::discriminator_penultimate;
    std::vector<int> labels;
};

// Frozen-network feature extraction; records nothing and mutates nothing.
FeatureMatrix extract_features(const AgentBundle& bundle, const Tensor& inputs,
                               const std::vector<int>& labels, FeatureSource source);

void export_feature_csv(const FeatureMatrix& fm, const std::filesystem::path& path);

// Multinomial logistic regression probe: zero init, 500 full-batch GD steps,
// weight lr 0.1 scaled by 1/feature_count (bias lr 0.1). The 1/f scaling makes
// the probe exactly invariant to duplicating every feature column.
double linear_probe(const FeatureMatrix& fm, double train_frac, uint64_t seed);

struct Embedding2D {
    Tensor points;  // [n x 2]
    bool degenerate = false;
    std::array<double, 2> explained_variance{0.0, 0.0};
    double total_variance = 0.0;
};

// PCA projection onto the top-2 principal components of the mean-centered
// features; each component's largest-magnitude coordinate is made positive.
Embedding2D embed_2d(const FeatureMatrix& fm);

// Lloyd k-means (k = #classes, class-mean init) purity of the embedding.
double cluster_purity(const Embedding2D& emb, const std::vector<int>& labels);

enum class InterpKind { noise_interp, message_interp };

struct InterpolationTrace {
    InterpKind kind = InterpKind::noise_interp;
    int which_generator = 1;
    Tensor a, b;        // endpoints in the interpolated space
    int steps = 0;
    Tensor generations;  // [steps x data_dim]
};

// Generations along the straight line from a to b with the counterpart input
// held at `fixed_other`; the two endpoint rows are generated from exactly a
// and exactly b (bitwise).
InterpolationTrace interpolate(const AgentBundle& bundle, int which, InterpKind kind,
                               const Tensor& a, const Tensor& b, int steps,
                               const Tensor& fixed_other);

void export_trace_csv(const InterpolationTrace& trace, const std::filesystem::path& path);

}  // namespace mpmgan
