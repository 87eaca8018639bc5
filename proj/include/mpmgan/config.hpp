#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mpmgan/data.hpp"
#include "mpmgan/nn.hpp"
#include "mpmgan/objectives.hpp"

namespace mpmgan {

struct DimsConfig {
    int noise_dim = 4;
    int msg_dim = 8;
    int data_dim = 2;
    int hidden = 64;

    bool operator==(const DimsConfig&) const = default;
};

struct DatasetConfig {
    std::string kind = "ring";  // "ring" | "blobs"
    int k = 8;                  // ring only
    double radius = 2.0;        // ring only
    std::vector<std::array<double, 2>> centers;  // blobs only
    double sigma = 0.02;
    int n = 8192;

    bool operator==(const DatasetConfig&) const = default;
};

struct FlagsConfig {
    bool detach_messages = false;
    bool non_saturating = false;
    bool shared_msg_gen = true;
    bool train_g1 = true;
    bool train_g2 = true;

    bool operator==(const FlagsConfig&) const = default;
};

struct TrainConfig {
    ObjectiveKind objective;
    NoiseKind noise1 = NoiseKind::uniform_pm1;
    NoiseKind noise2 = NoiseKind::uniform_pm1;
    DimsConfig dims;
    DatasetConfig dataset;
    AdamConfig optimizer;
    int64_t n_iters = 1000;
    int batch = 128;
    uint64_t seed = 0;
    int64_t checkpoint_interval = 500;
    std::string output_dir;
    FlagsConfig flags;

    bool operator==(const TrainConfig&) const = default;

    NoiseSpec noise_spec(int which) const {
        return NoiseSpec{which == 1 ? noise1 : noise2, dims.noise_dim};
    }
};

// Strict schema: unknown keys are rejected (ConfigError names the key), types
// are checked, defaults are materialized so serialize(parse(x)) is total.
TrainConfig parse_config(const nlohmann::json& j);
TrainConfig load_config_file(const std::filesystem::path& path);
nlohmann::json config_to_json(const TrainConfig& cfg);

// Builds the dataset as a pure function of (dataset spec, seed).
SyntheticDataset build_dataset(const TrainConfig& cfg);

}  // namespace mpmgan
