#include "mpmgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mpmgan/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace mpmgan {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'M', 'P', 'M', 'G', 'A', 'N', 'C', 'K'};
}

const NamedArray* Checkpoint::find(const std::string& name) const {
    for (const NamedArray& a : arrays) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

const NamedArray& Checkpoint::require(const std::string& name) const {
    const NamedArray* a = find(name);
    if (!a) throw DomainError("checkpoint: missing array \"" + name + "\"");
    return *a;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    json manifest;
    manifest["schema_version"] = ck.schema_version;
    manifest["iteration"] = ck.iteration;
    manifest["config"] = config_to_json(ck.config);
    manifest["rng"] = {{"data", ck.rng_data},
                       {"noise1", ck.rng_noise1},
                       {"noise2", ck.rng_noise2}};
    manifest["buffer_produced_at"] = ck.buffer_produced_at;
    manifest["has_prev"] = ck.has_prev;
    json adam = json::object();
    for (const auto& [k, v] : ck.adam_steps) adam[k] = v;
    manifest["adam"] = adam;
    json arrays = json::array();
    for (const NamedArray& a : ck.arrays) {
        arrays.push_back({{"name", a.name}, {"shape", a.shape}});
    }
    manifest["arrays"] = arrays;

    const std::string mtext = manifest.dump(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const uint64_t mlen = mtext.size();
    out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    for (const NamedArray& a : ck.arrays) {
        out.write(reinterpret_cast<const char*>(a.values.data()),
                  static_cast<std::streamsize>(a.values.size() * sizeof(double)));
    }
    if (!out) throw IoError("short write to checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError("not a checkpoint file: " + path.string());
    }
    uint64_t mlen = 0;
    in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
    std::string mtext(mlen, '\0');
    in.read(mtext.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw IoError("truncated checkpoint manifest: " + path.string());

    json manifest;
    try {
        manifest = json::parse(mtext);
    } catch (const json::parse_error& e) {
        throw IoError("corrupt checkpoint manifest: " + std::string(e.what()));
    }

    Checkpoint ck;
    ck.schema_version = manifest.at("schema_version").get<int>();
    if (ck.schema_version != kCheckpointSchemaVersion) {
        throw VersionError("checkpoint schema version " +
                           std::to_string(ck.schema_version) + ", expected " +
                           std::to_string(kCheckpointSchemaVersion));
    }
    ck.iteration = manifest.at("iteration").get<int64_t>();
    ck.config = parse_config(manifest.at("config"));
    ck.rng_data = manifest.at("rng").at("data").get<uint64_t>();
    ck.rng_noise1 = manifest.at("rng").at("noise1").get<uint64_t>();
    ck.rng_noise2 = manifest.at("rng").at("noise2").get<uint64_t>();
    ck.buffer_produced_at = manifest.at("buffer_produced_at").get<int64_t>();
    ck.has_prev = manifest.at("has_prev").get<bool>();
    for (const auto& [k, v] : manifest.at("adam").items()) {
        ck.adam_steps[k] = v.get<int64_t>();
    }
    for (const auto& entry : manifest.at("arrays")) {
        NamedArray a;
        a.name = entry.at("name").get<std::string>();
        a.shape = entry.at("shape").get<Shape>();
        a.values.resize(static_cast<size_t>(numel_of(a.shape)));
        in.read(reinterpret_cast<char*>(a.values.data()),
                static_cast<std::streamsize>(a.values.size() * sizeof(double)));
        if (!in) throw IoError("checkpoint " + path.string() + ": missing data for array " +
                               a.name);
        ck.arrays.push_back(std::move(a));
    }
    return ck;
}

}  // namespace mpmgan
