#include "mpmgan/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "mpmgan/errors.hpp"

namespace mpmgan {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key())) {
            throw ConfigError("unknown key \"" + it.key() + "\"" +
                              (where.empty() ? "" : " in " + where));
        }
    }
}

const json* get_opt(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

template <typename T>
T expect(const json& j, const char* key, const char* type_name, bool (json::*pred)() const,
         const std::string& where) {
    const json* v = get_opt(j, key);
    if (!v) throw ConfigError("missing key \"" + std::string(key) + "\" in " + where);
    if (!((*v).*pred)()) {
        throw ConfigError("key \"" + std::string(key) + "\" in " + where + " must be " +
                          type_name);
    }
    return v->get<T>();
}

double expect_number(const json& j, const char* key, const std::string& where,
                     double fallback, bool has_fallback) {
    const json* v = get_opt(j, key);
    if (!v) {
        if (has_fallback) return fallback;
        throw ConfigError("missing key \"" + std::string(key) + "\" in " + where);
    }
    if (!v->is_number()) {
        throw ConfigError("key \"" + std::string(key) + "\" in " + where +
                          " must be a number");
    }
    return v->get<double>();
}

int64_t expect_int(const json& j, const char* key, const std::string& where,
                   int64_t fallback, bool has_fallback) {
    const json* v = get_opt(j, key);
    if (!v) {
        if (has_fallback) return fallback;
        throw ConfigError("missing key \"" + std::string(key) + "\" in " + where);
    }
    if (!v->is_number_integer()) {
        throw ConfigError("key \"" + std::string(key) + "\" in " + where +
                          " must be an integer");
    }
    return v->get<int64_t>();
}

bool expect_bool(const json& j, const char* key, const std::string& where, bool fallback) {
    const json* v = get_opt(j, key);
    if (!v) return fallback;
    if (!v->is_boolean()) {
        throw ConfigError("key \"" + std::string(key) + "\" in " + where +
                          " must be a boolean");
    }
    return v->get<bool>();
}

std::string expect_string(const json& j, const char* key, const std::string& where,
                          const char* fallback) {
    const json* v = get_opt(j, key);
    if (!v) {
        if (fallback) return fallback;
        throw ConfigError("missing key \"" + std::string(key) + "\" in " + where);
    }
    if (!v->is_string()) {
        throw ConfigError("key \"" + std::string(key) + "\" in " + where +
                          " must be a string");
    }
    return v->get<std::string>();
}

}  // namespace

TrainConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown(j,
                   {"objective", "noise1", "noise2", "dims", "dataset", "optimizer",
                    "n_iters", "batch", "seed", "checkpoint_interval", "output_dir",
                    "flags"},
                   "config");

    TrainConfig cfg;

    if (const json* obj = get_opt(j, "objective")) {
        if (!obj->is_object()) throw ConfigError("key \"objective\" must be an object");
        reject_unknown(*obj, {"generator_mode", "message_mode"}, "objective");
        cfg.objective.generator_mode = generator_mode_from_name(
            expect_string(*obj, "generator_mode", "objective", "vanilla"));
        cfg.objective.message_mode = message_mode_from_name(
            expect_string(*obj, "message_mode", "objective", "none"));
    }

    cfg.noise1 = noise_kind_from_name(expect_string(j, "noise1", "config", "uniform_pm1"));
    cfg.noise2 = noise_kind_from_name(expect_string(j, "noise2", "config", "uniform_pm1"));

    if (const json* dims = get_opt(j, "dims")) {
        if (!dims->is_object()) throw ConfigError("key \"dims\" must be an object");
        reject_unknown(*dims, {"noise_dim", "msg_dim", "data_dim", "hidden"}, "dims");
        cfg.dims.noise_dim = static_cast<int>(expect_int(*dims, "noise_dim", "dims", 4, true));
        cfg.dims.msg_dim = static_cast<int>(expect_int(*dims, "msg_dim", "dims", 8, true));
        cfg.dims.data_dim = static_cast<int>(expect_int(*dims, "data_dim", "dims", 2, true));
        cfg.dims.hidden = static_cast<int>(expect_int(*dims, "hidden", "dims", 64, true));
    }
    if (cfg.dims.noise_dim < 1 || cfg.dims.msg_dim < 1 || cfg.dims.data_dim < 1 ||
        cfg.dims.hidden < 1) {
        throw ConfigError("dims entries must be positive");
    }
    if (cfg.dims.data_dim != 2) {
        throw ConfigError("data_dim must be 2 (synthetic datasets live on the plane)");
    }

    {
        const json* ds = get_opt(j, "dataset");
        if (!ds) throw ConfigError("missing key \"dataset\" in config");
        if (!ds->is_object()) throw ConfigError("key \"dataset\" must be an object");
        reject_unknown(*ds, {"kind", "k", "radius", "centers", "sigma", "n"}, "dataset");
        cfg.dataset.kind = expect_string(*ds, "kind", "dataset", nullptr);
        cfg.dataset.sigma = expect_number(*ds, "sigma", "dataset", 0.02, true);
        cfg.dataset.n = static_cast<int>(expect_int(*ds, "n", "dataset", 8192, true));
        if (cfg.dataset.kind == "ring") {
            if (get_opt(*ds, "centers"))
                throw ConfigError("key \"centers\" is only valid for dataset kind blobs");
            cfg.dataset.k = static_cast<int>(expect_int(*ds, "k", "dataset", 8, true));
            cfg.dataset.radius = expect_number(*ds, "radius", "dataset", 2.0, true);
            cfg.dataset.centers.clear();
        } else if (cfg.dataset.kind == "blobs") {
            const json* cs = get_opt(*ds, "centers");
            if (!cs || !cs->is_array() || cs->empty()) {
                throw ConfigError("dataset kind blobs requires a non-empty \"centers\" array");
            }
            for (const auto& c : *cs) {
                if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
                    throw ConfigError("each entry of \"centers\" must be [x, y]");
                }
                cfg.dataset.centers.push_back({c[0].get<double>(), c[1].get<double>()});
            }
            cfg.dataset.k = static_cast<int>(cfg.dataset.centers.size());
            cfg.dataset.radius = 0.0;
        } else {
            throw ConfigError("dataset kind must be \"ring\" or \"blobs\", got \"" +
                              cfg.dataset.kind + "\"");
        }
        if (cfg.dataset.k < 1) throw ConfigError("dataset k must be >= 1");
        if (!(cfg.dataset.sigma > 0.0)) throw ConfigError("dataset sigma must be > 0");
        if (cfg.dataset.n < 1) throw ConfigError("dataset n must be >= 1");
    }

    if (const json* opt = get_opt(j, "optimizer")) {
        if (!opt->is_object()) throw ConfigError("key \"optimizer\" must be an object");
        reject_unknown(*opt, {"lr", "beta1", "beta2", "epsilon"}, "optimizer");
        cfg.optimizer.lr = expect_number(*opt, "lr", "optimizer", 2e-4, true);
        cfg.optimizer.beta1 = expect_number(*opt, "beta1", "optimizer", 0.5, true);
        cfg.optimizer.beta2 = expect_number(*opt, "beta2", "optimizer", 0.999, true);
        cfg.optimizer.epsilon = expect_number(*opt, "epsilon", "optimizer", 1e-8, true);
    }

    cfg.n_iters = expect_int(j, "n_iters", "config", 0, false);
    if (cfg.n_iters < 0) throw ConfigError("n_iters must be >= 0");
    cfg.batch = static_cast<int>(expect_int(j, "batch", "config", 128, true));
    if (cfg.batch < 1) throw ConfigError("batch must be >= 1");
    {
        const json* v = get_opt(j, "seed");
        if (!v) throw ConfigError("missing key \"seed\" in config");
        if (!v->is_number_unsigned() && !v->is_number_integer()) {
            throw ConfigError("key \"seed\" must be a non-negative integer");
        }
        if (v->is_number_integer() && !v->is_number_unsigned() && v->get<int64_t>() < 0) {
            throw ConfigError("key \"seed\" must be a non-negative integer");
        }
        cfg.seed = v->get<uint64_t>();
    }
    cfg.checkpoint_interval = expect_int(j, "checkpoint_interval", "config", 500, true);
    if (cfg.checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be >= 1");
    cfg.output_dir = expect_string(j, "output_dir", "config", nullptr);
    if (cfg.output_dir.empty()) throw ConfigError("output_dir must be non-empty");

    if (const json* fl = get_opt(j, "flags")) {
        if (!fl->is_object()) throw ConfigError("key \"flags\" must be an object");
        reject_unknown(*fl,
                       {"detach_messages", "non_saturating", "shared_msg_gen", "train_g1",
                        "train_g2"},
                       "flags");
        cfg.flags.detach_messages = expect_bool(*fl, "detach_messages", "flags", false);
        cfg.flags.non_saturating = expect_bool(*fl, "non_saturating", "flags", false);
        cfg.flags.shared_msg_gen = expect_bool(*fl, "shared_msg_gen", "flags", true);
        cfg.flags.train_g1 = expect_bool(*fl, "train_g1", "flags", true);
        cfg.flags.train_g2 = expect_bool(*fl, "train_g2", "flags", true);
    }
    if (!cfg.flags.train_g1 && !cfg.flags.train_g2 && cfg.n_iters > 0) {
        throw ConfigError("at least one of train_g1/train_g2 must be true");
    }

    return cfg;
}

TrainConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
    json j;
    j["objective"] = {{"generator_mode", generator_mode_name(cfg.objective.generator_mode)},
                      {"message_mode", message_mode_name(cfg.objective.message_mode)}};
    j["noise1"] = noise_kind_name(cfg.noise1);
    j["noise2"] = noise_kind_name(cfg.noise2);
    j["dims"] = {{"noise_dim", cfg.dims.noise_dim},
                 {"msg_dim", cfg.dims.msg_dim},
                 {"data_dim", cfg.dims.data_dim},
                 {"hidden", cfg.dims.hidden}};
    json ds;
    ds["kind"] = cfg.dataset.kind;
    ds["sigma"] = cfg.dataset.sigma;
    ds["n"] = cfg.dataset.n;
    if (cfg.dataset.kind == "ring") {
        ds["k"] = cfg.dataset.k;
        ds["radius"] = cfg.dataset.radius;
    } else {
        json cs = json::array();
        for (const auto& c : cfg.dataset.centers) cs.push_back({c[0], c[1]});
        ds["centers"] = cs;
    }
    j["dataset"] = ds;
    j["optimizer"] = {{"lr", cfg.optimizer.lr},
                      {"beta1", cfg.optimizer.beta1},
                      {"beta2", cfg.optimizer.beta2},
                      {"epsilon", cfg.optimizer.epsilon}};
    j["n_iters"] = cfg.n_iters;
    j["batch"] = cfg.batch;
    j["seed"] = cfg.seed;
    j["checkpoint_interval"] = cfg.checkpoint_interval;
    j["output_dir"] = cfg.output_dir;
    j["flags"] = {{"detach_messages", cfg.flags.detach_messages},
                  {"non_saturating", cfg.flags.non_saturating},
                  {"shared_msg_gen", cfg.flags.shared_msg_gen},
                  {"train_g1", cfg.flags.train_g1},
                  {"train_g2", cfg.flags.train_g2}};
    return j;
}

SyntheticDataset build_dataset(const TrainConfig& cfg) {
    Rng rng = Rng(cfg.seed).child(0xDA7A);
    if (cfg.dataset.kind == "ring") {
        return make_ring_mixture(cfg.dataset.k, cfg.dataset.radius, cfg.dataset.sigma,
                                 cfg.dataset.n, rng);
    }
    return make_labeled_blobs(cfg.dataset.centers, cfg.dataset.sigma, cfg.dataset.n, rng);
}

}  // namespace mpmgan
