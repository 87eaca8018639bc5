#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "mpmgan/artifacts.hpp"
#include "mpmgan/checkpoint.hpp"
#include "mpmgan/config.hpp"
#include "mpmgan/errors.hpp"
#include "mpmgan/eval.hpp"
#include "mpmgan/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mpmgan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitVersion = 4;
constexpr int kExitSemantic = 5;

// Tags for the deterministic eval-time streams derived from the run seed.
constexpr uint64_t kTagEvalCoverage = 0xE7A1;
constexpr uint64_t kTagEvalInterp = 0x17E4;
constexpr uint64_t kTagEvalProbe = 0x9806;
constexpr uint64_t kTagEvalScatter = 0x5CA7;

// Generates `n` samples from one generator, tiling the checkpointed message
// buffer when the model consumes messages.
Tensor sample_generations(const Trainer& trainer, int which, int n, Rng& rng) {
    const AgentBundle& bundle = trainer.bundle();
    const NoiseSpec& spec = which == 1 ? bundle.noise1 : bundle.noise2;
    const Tensor& msgs = which == 1 ? trainer.buffer().m2 : trainer.buffer().m1;
    Tape::NoGrad ng;
    Tensor z = sample_noise(spec, n, rng);
    Tensor msg;
    if (bundle.objective.message_mode != MessageMode::none) {
        const int batch = msgs.shape()[0];
        const int md = msgs.shape()[1];
        std::vector<double> tiled(static_cast<size_t>(n) * md);
        for (int i = 0; i < n; ++i) {
            const int src = i % batch;
            std::copy(msgs.values().begin() + static_cast<size_t>(src) * md,
                      msgs.values().begin() + static_cast<size_t>(src + 1) * md,
                      tiled.begin() + static_cast<size_t>(i) * md);
        }
        msg = Tensor::from_values({n, md}, std::move(tiled));
    }
    return generator_forward(bundle, which, z, msg);
}

json coverage_to_json(const ModeCoverageReport& rep) {
    return json{{"k", rep.k},
                {"n_samples", rep.n_samples},
                {"min_fraction", rep.min_fraction},
                {"modes_covered", rep.modes_covered},
                {"covered_modes", rep.covered_modes},
                {"per_mode_fraction", rep.per_mode_fraction},
                {"high_quality_fraction", rep.high_quality_fraction}};
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void require_message_nets(const Checkpoint& ck, const char* what) {
    if (ck.config.objective.message_mode == MessageMode::none) {
        throw SemanticError(std::string(what) +
                            ": message networks untrained (message_mode is none)");
    }
}

int cmd_train(const std::string& config_path) {
    TrainConfig cfg = load_config_file(config_path);
    fs::create_directories(cfg.output_dir);
    RunLock lock(cfg.output_dir);
    SyntheticDataset dataset = build_dataset(cfg);
    RunArtifacts artifacts = train(cfg, dataset);
    std::cout << "run complete: " << artifacts.run_dir.string() << " ("
              << artifacts.metrics.size() << " iterations)\n";
    return kExitOk;
}

struct EvalContext {
    fs::path run_dir;
    Checkpoint ck;
    SyntheticDataset dataset;
    Trainer trainer;

    explicit EvalContext(const std::string& ckpt_path)
        : run_dir(fs::absolute(ckpt_path).parent_path()),
          ck(load_checkpoint(ckpt_path)),
          dataset(build_dataset(ck.config)),
          trainer(ck, dataset) {}
};

int cmd_eval_coverage(const std::string& ckpt_path, int samples, double min_fraction) {
    EvalContext ctx(ckpt_path);
    RunLock lock(ctx.run_dir);
    Rng rng = Rng(ctx.ck.config.seed).child(kTagEvalCoverage);
    Tensor gen1 = sample_generations(ctx.trainer, 1, samples, rng);
    Tensor gen2 = sample_generations(ctx.trainer, 2, samples, rng);
    ModeCoverageReport r1 = mode_coverage(gen1, ctx.dataset, min_fraction);
    ModeCoverageReport r2 = mode_coverage(gen2, ctx.dataset, min_fraction);

    std::vector<int> union_modes;
    for (int j = 0; j < r1.k; ++j) {
        if (r1.per_mode_fraction[j] >= min_fraction || r2.per_mode_fraction[j] >= min_fraction) {
            union_modes.push_back(j);
        }
    }
    json out;
    out["iteration"] = ctx.ck.iteration;
    out["g1"] = coverage_to_json(r1);
    out["g2"] = coverage_to_json(r2);
    out["union"] = {{"modes_covered", static_cast<int>(union_modes.size())},
                    {"covered_modes", union_modes}};
    write_json(ctx.run_dir / "coverage.json", out);
    write_run_manifest(ctx.run_dir);
    std::cout << "coverage: g1=" << r1.modes_covered << "/" << r1.k
              << " g2=" << r2.modes_covered << "/" << r2.k << " union=" << union_modes.size()
              << "\n";
    return kExitOk;
}

int cmd_eval_probe(const std::string& ckpt_path, const std::string& source) {
    EvalContext ctx(ckpt_path);
    RunLock lock(ctx.run_dir);
    FeatureSource src;
    if (source == "disc") {
        src = FeatureSource::discriminator_penultimate;
    } else if (source == "msg") {
        src = FeatureSource::message_generator;
    } else if (source == "both") {
        src = FeatureSource::concatenated;
    } else {
        throw ConfigError("probe source must be disc|msg|both");
    }
    if (src != FeatureSource::discriminator_penultimate) {
        require_message_nets(ctx.ck, "probe");
    }
    if (ctx.dataset.k() < 2) {
        throw SemanticError("probe: dataset has a single class");
    }
    FeatureMatrix fm =
        extract_features(ctx.trainer.bundle(), ctx.dataset.samples, ctx.dataset.labels, src);
    const double acc =
        linear_probe(fm, 0.7, Rng(ctx.ck.config.seed).child(kTagEvalProbe).state);
    const std::string name = "probe_" + source;
    json out;
    out["source"] = source;
    out["accuracy"] = acc;
    out["chance"] = 1.0 / ctx.dataset.k();
    out["feature_dim"] = fm.features.shape()[1];
    out["n"] = ctx.dataset.n();
    out["train_frac"] = 0.7;
    write_json(ctx.run_dir / (name + ".json"), out);
    export_feature_csv(fm, ctx.run_dir / (name + "_features.csv"));
    write_run_manifest(ctx.run_dir);
    std::cout << "probe " << source << ": accuracy " << format_g6(acc) << " (chance "
              << format_g6(1.0 / ctx.dataset.k()) << ")\n";
    return kExitOk;
}

int cmd_eval_cluster(const std::string& ckpt_path) {
    EvalContext ctx(ckpt_path);
    RunLock lock(ctx.run_dir);
    require_message_nets(ctx.ck, "cluster");
    FeatureMatrix fm = extract_features(ctx.trainer.bundle(), ctx.dataset.samples,
                                        ctx.dataset.labels, FeatureSource::message_generator);
    Embedding2D emb = embed_2d(fm);
    const double purity = cluster_purity(emb, fm.labels);

    {
        std::ofstream out(ctx.run_dir / "cluster.csv", std::ios::binary);
        if (!out) throw IoError("cannot write cluster.csv");
        out << "e0,e1,label\n";
        char buf[96];
        const auto& p = emb.points.values();
        for (int i = 0; i < emb.points.shape()[0]; ++i) {
            std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%d\n", p[2 * i], p[2 * i + 1],
                          fm.labels[i]);
            out << buf;
        }
    }
    json out;
    out["purity"] = purity;
    out["degenerate"] = emb.degenerate;
    out["explained_variance"] = {emb.explained_variance[0], emb.explained_variance[1]};
    out["total_variance"] = emb.total_variance;
    write_json(ctx.run_dir / "cluster.json", out);

    // scatter of the embedding, one colour per label
    const auto& p = emb.points.values();
    double mn = 0, mx = 1;
    if (!p.empty()) {
        mn = *std::min_element(p.begin(), p.end());
        mx = *std::max_element(p.begin(), p.end());
    }
    SvgPlot plot(520, 520, mn, mx, mn, mx);
    plot.axes();
    static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
    for (int i = 0; i < emb.points.shape()[0]; ++i) {
        plot.circle(p[2 * i], p[2 * i + 1], 2.0, palette[fm.labels[i] % 8]);
    }
    plot.save(ctx.run_dir / "cluster.svg");
    write_run_manifest(ctx.run_dir);
    std::cout << "cluster: purity " << format_g6(purity) << "\n";
    return kExitOk;
}

int cmd_eval_interp(const std::string& ckpt_path, const std::string& kind_s,
                    const std::string& gen_s, int steps) {
    EvalContext ctx(ckpt_path);
    RunLock lock(ctx.run_dir);
    const InterpKind kind =
        kind_s == "noise" ? InterpKind::noise_interp : InterpKind::message_interp;
    const int which = gen_s == "g1" ? 1 : 2;
    const AgentBundle& bundle = ctx.trainer.bundle();

    if (kind == InterpKind::message_interp) {
        require_message_nets(ctx.ck, "interp");
    }

    Rng rng = Rng(ctx.ck.config.seed).child(kTagEvalInterp + which * 4 +
                                            (kind == InterpKind::noise_interp ? 0 : 1));
    const NoiseSpec& nspec = which == 1 ? bundle.noise1 : bundle.noise2;
    const int msg_dim = bundle.msg_dim;
    Tensor a, b, fixed;
    if (kind == InterpKind::noise_interp) {
        a = Tensor::from_values({nspec.dim}, sample_noise(nspec, 1, rng).values());
        b = Tensor::from_values({nspec.dim}, sample_noise(nspec, 1, rng).values());
        if (bundle.objective.message_mode != MessageMode::none) {
            // hold a trained message fixed: first row of the buffered batch
            const Tensor& msgs = which == 1 ? ctx.trainer.buffer().m2 : ctx.trainer.buffer().m1;
            fixed = Tensor::from_values(
                {msg_dim}, std::vector<double>(msgs.values().begin(),
                                               msgs.values().begin() + msg_dim));
        }
    } else {
        NoiseSpec mspec{NoiseKind::uniform_pm1, msg_dim};
        a = Tensor::from_values({msg_dim}, sample_noise(mspec, 1, rng).values());
        b = Tensor::from_values({msg_dim}, sample_noise(mspec, 1, rng).values());
        fixed = Tensor::from_values({nspec.dim}, sample_noise(nspec, 1, rng).values());
    }

    InterpolationTrace trace = interpolate(bundle, which, kind, a, b, steps, fixed);
    const std::string base = "interp_" + kind_s + "_" + gen_s;
    export_trace_csv(trace, ctx.run_dir / (base + ".csv"));

    // trace over the dataset's mode centers
    double mn = -1, mx = 1;
    const auto& g = trace.generations.values();
    for (double v : g) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    for (const auto& c : ctx.dataset.centers) {
        mn = std::min({mn, c[0], c[1]});
        mx = std::max({mx, c[0], c[1]});
    }
    const double pad = 0.1 * (mx - mn);
    SvgPlot plot(520, 520, mn - pad, mx + pad, mn - pad, mx + pad);
    plot.axes();
    for (const auto& c : ctx.dataset.centers) plot.circle(c[0], c[1], 5.0, "#bbbbbb", false);
    std::vector<std::pair<double, double>> pts;
    for (int t = 0; t < trace.steps; ++t) pts.push_back({g[2 * t], g[2 * t + 1]});
    plot.polyline(pts, "#1f77b4", 1.5);
    for (int t = 0; t < trace.steps; ++t) plot.circle(g[2 * t], g[2 * t + 1], 2.2, "#d62728");
    plot.save(ctx.run_dir / (base + ".svg"));
    write_run_manifest(ctx.run_dir);
    std::cout << "interp " << kind_s << " " << gen_s << ": " << steps << " steps\n";
    return kExitOk;
}

std::vector<StepMetrics> read_metrics_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("missing metrics.csv at " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kMetricsCsvHeader) {
        throw IoError("metrics.csv has an unexpected header");
    }
    std::vector<StepMetrics> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        StepMetrics m;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        if (!(ss >> m.iter >> m.loss_d >> m.loss_g1 >> m.loss_g2 >> m.mean_d_real >>
              m.mean_d_g1 >> m.mean_d_g2 >> m.hinge_g1 >> m.hinge_g2)) {
            throw IoError("corrupt metrics.csv row: " + line);
        }
        rows.push_back(m);
    }
    return rows;
}

int cmd_plot(const std::string& run_dir_s) {
    const fs::path run_dir(run_dir_s);
    RunLock lock(run_dir);
    const std::vector<StepMetrics> rows = read_metrics_csv(run_dir / "metrics.csv");

    {
        double lo = 0.0, hi = 1.0;
        if (!rows.empty()) {
            lo = 1e300;
            hi = -1e300;
            for (const auto& m : rows) {
                for (double v : {m.loss_d, m.loss_g1, m.loss_g2}) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
        }
        const double x_hi = rows.empty() ? 1.0 : static_cast<double>(rows.back().iter);
        SvgPlot plot(720, 420, 0.0, std::max(1.0, x_hi), lo, hi);
        plot.axes();
        auto series = [&](double StepMetrics::*field, const char* color, const char* label,
                          int slot) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& m : rows) {
                pts.push_back({static_cast<double>(m.iter), m.*field});
            }
            plot.polyline(pts, color, 1.2);
            plot.text(560, 20 + 14 * slot, label, color);
        };
        series(&StepMetrics::loss_d, "#d62728", "loss_d", 0);
        series(&StepMetrics::loss_g1, "#1f77b4", "loss_g1", 1);
        series(&StepMetrics::loss_g2, "#2ca02c", "loss_g2", 2);
        plot.save(run_dir / "loss_curves.svg");
    }

    // generation scatter from the final checkpoint, when present
    const fs::path final_ck = run_dir / "ckpt_final.mpck";
    if (fs::exists(final_ck)) {
        Checkpoint ck = load_checkpoint(final_ck);
        SyntheticDataset dataset = build_dataset(ck.config);
        Trainer trainer(ck, dataset);
        Rng rng = Rng(ck.config.seed).child(kTagEvalScatter);
        Tensor gen1 = sample_generations(trainer, 1, 512, rng);
        Tensor gen2 = sample_generations(trainer, 2, 512, rng);
        double mn = -1, mx = 1;
        for (const auto& c : dataset.centers) {
            mn = std::min({mn, c[0] - 1.0, c[1] - 1.0});
            mx = std::max({mx, c[0] + 1.0, c[1] + 1.0});
        }
        SvgPlot plot(520, 520, mn, mx, mn, mx);
        plot.axes();
        const auto& v1 = gen1.values();
        const auto& v2 = gen2.values();
        auto clip = [&](double v) { return std::clamp(v, mn, mx); };
        for (int i = 0; i < 512; ++i) {
            plot.circle(clip(v1[2 * i]), clip(v1[2 * i + 1]), 1.6, "#1f77b4");
        }
        for (int i = 0; i < 512; ++i) {
            plot.cross(clip(v2[2 * i]), clip(v2[2 * i + 1]), 2.2, "#2ca02c");
        }
        for (const auto& c : dataset.centers) plot.circle(c[0], c[1], 5.0, "#d62728", false);
        plot.text(48, 20, "g1=dots g2=crosses centers=rings");
        plot.save(run_dir / "scatter.svg");
    }
    write_run_manifest(run_dir);
    std::cout << "plots written to " << run_dir.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale multi-agent message-passing GAN lab"};
    app.require_subcommand(1);

    std::string config_path;
    CLI::App* train_cmd = app.add_subcommand("train", "run a training experiment");
    train_cmd->add_option("config", config_path, "JSON config file")->required();

    std::string ckpt_path;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
    eval_cmd->require_subcommand(1);

    int cov_samples = 2000;
    double cov_min_fraction = 0.01;
    CLI::App* cov_cmd = eval_cmd->add_subcommand("coverage", "mode-coverage report");
    cov_cmd->add_option("--samples", cov_samples, "generations per generator");
    cov_cmd->add_option("--min-fraction", cov_min_fraction, "coverage threshold");

    std::string probe_source;
    CLI::App* probe_cmd = eval_cmd->add_subcommand("probe", "linear probe on features");
    probe_cmd->add_option("--source", probe_source, "disc|msg|both")
        ->required()
        ->check(CLI::IsMember({"disc", "msg", "both"}));

    CLI::App* cluster_cmd = eval_cmd->add_subcommand("cluster", "message-space embedding");

    std::string interp_kind, interp_gen = "g1";
    int interp_steps = 16;
    CLI::App* interp_cmd = eval_cmd->add_subcommand("interp", "interpolation trace");
    interp_cmd->add_option("--kind", interp_kind, "noise|message")
        ->required()
        ->check(CLI::IsMember({"noise", "message"}));
    interp_cmd->add_option("--gen", interp_gen, "g1|g2")
        ->check(CLI::IsMember({"g1", "g2"}));
    interp_cmd->add_option("--steps", interp_steps, "interpolation steps")
        ->check(CLI::PositiveNumber);

    std::string run_dir;
    CLI::App* plot_cmd = app.add_subcommand("plot", "render loss curves and scatters");
    plot_cmd->add_option("run_dir", run_dir, "run directory with metrics.csv")->required();

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(train_cmd)) return cmd_train(config_path);
        if (app.got_subcommand(eval_cmd)) {
            if (eval_cmd->got_subcommand(cov_cmd)) {
                return cmd_eval_coverage(ckpt_path, cov_samples, cov_min_fraction);
            }
            if (eval_cmd->got_subcommand(probe_cmd)) {
                return cmd_eval_probe(ckpt_path, probe_source);
            }
            if (eval_cmd->got_subcommand(cluster_cmd)) return cmd_eval_cluster(ckpt_path);
            if (eval_cmd->got_subcommand(interp_cmd)) {
                return cmd_eval_interp(ckpt_path, interp_kind, interp_gen, interp_steps);
            }
        }
        if (app.got_subcommand(plot_cmd)) return cmd_plot(run_dir);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericAbort& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const VersionError& e) {
        std::cerr << "version error: " << e.what() << "\n";
        return kExitVersion;
    } catch (const SemanticError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSemantic;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
