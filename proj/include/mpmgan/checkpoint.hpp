#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mpmgan/config.hpp"
#include "mpmgan/tensor.hpp"

namespace mpmgan {

inline constexpr int kCheckpointSchemaVersion = 1;

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

// Complete trainer state: a JSON manifest (schema version, config echo, rng
// states, iteration, array directory) followed by raw little-endian f64
// arrays in manifest order. save -> load -> save is byte-identical.
struct Checkpoint {
    int schema_version = kCheckpointSchemaVersion;
    TrainConfig config;
    int64_t iteration = 0;
    uint64_t rng_data = 0;
    uint64_t rng_noise1 = 0;
    uint64_t rng_noise2 = 0;
    int64_t buffer_produced_at = -1;
    bool has_prev = false;
    std::map<std::string, int64_t> adam_steps;
    std::vector<NamedArray> arrays;

    const NamedArray* find(const std::string& name) const;
    const NamedArray& require(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mpmgan
