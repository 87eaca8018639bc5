#include "mpmgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "mpmgan/errors.hpp"
#include "mpmgan/rng.hpp"

namespace mpmgan {

// ---- mode coverage ----------------------------------------------------------

ModeCoverageReport mode_coverage(const Tensor& samples, const SyntheticDataset& dataset,
                                 double min_fraction) {
    if (dataset.centers.empty()) {
        throw DomainError("mode_coverage: dataset lacks known centers");
    }
    if (!(min_fraction > 0.0 && min_fraction < 1.0)) {
        throw ConfigError("mode_coverage: min_fraction must be in (0,1)");
    }
    if (samples.shape().size() != 2 || samples.shape()[1] != 2) {
        throw ShapeError("mode_coverage: samples must be [n x 2], got " +
                         shape_str(samples.shape()));
    }
    const int k = dataset.k();
    const int n = samples.shape()[0];
    const double r2 = 9.0 * dataset.sigma * dataset.sigma;  // (3 sigma)^2
    std::vector<int64_t> counts(k, 0);
    const auto& v = samples.values();
    for (int i = 0; i < n; ++i) {
        const double x = v[2 * i], y = v[2 * i + 1];
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) {
            const double dx = x - dataset.centers[j][0];
            const double dy = y - dataset.centers[j][1];
            const double d = dx * dx + dy * dy;
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        if (best_d <= r2) counts[best] += 1;
    }
    ModeCoverageReport rep;
    rep.k = k;
    rep.n_samples = n;
    rep.min_fraction = min_fraction;
    rep.per_mode_fraction.resize(k);
    for (int j = 0; j < k; ++j) {
        rep.per_mode_fraction[j] = static_cast<double>(counts[j]) / n;
        if (rep.per_mode_fraction[j] >= min_fraction) {
            rep.covered_modes.push_back(j);
        }
        rep.high_quality_fraction += rep.per_mode_fraction[j];
    }
    rep.modes_covered = static_cast<int>(rep.covered_modes.size());
    return rep;
}

// ---- feature extraction -------------------------------------------------------

const char* feature_source_name(FeatureSource s) {
    switch (s) {
        case FeatureSource::discriminator_penultimate: return "disc";
        case FeatureSource::message_generator: return "msg";
        case FeatureSource::concatenated: return "both";
    }
    return "?";
}

FeatureMatrix extract_features(const AgentBundle& bundle, const Tensor& inputs,
                               const std::vector<int>& labels, FeatureSource source) {
    if (static_cast<int>(labels.size()) != inputs.shape()[0]) {
        throw ShapeError("extract_features: labels do not match inputs");
    }
    Tape::NoGrad ng;
    Tensor feats;
    switch (source) {
        case FeatureSource::discriminator_penultimate:
            feats = bundle.d.forward_upto(inputs, bundle.d.layer_count() - 1);
            break;
        case FeatureSource::message_generator:
            feats = bundle.msg_gen.forward(inputs);
            break;
        case FeatureSource::concatenated:
            feats = concat_last_axis(
                {bundle.d.forward_upto(inputs, bundle.d.layer_count() - 1),
                 bundle.msg_gen.forward(inputs)});
            break;
    }
    return FeatureMatrix{feats.detach(), source, labels};
}

void export_feature_csv(const FeatureMatrix& fm, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const int f = fm.features.shape()[1];
    for (int j = 0; j < f; ++j) out << "f" << j << ",";
    out << "label\n";
    const auto& v = fm.features.values();
    char buf[40];
    for (int i = 0; i < fm.features.shape()[0]; ++i) {
        for (int j = 0; j < f; ++j) {
            std::snprintf(buf, sizeof(buf), "%.6g,", v[static_cast<size_t>(i) * f + j]);
            out << buf;
        }
        out << fm.labels[i] << "\n";
    }
}

// ---- linear probe -------------------------------------------------------------

double linear_probe(const FeatureMatrix& fm, double train_frac, uint64_t seed) {
    const int n = fm.features.shape()[0];
    const int f = fm.features.shape()[1];
    if (!(train_frac > 0.0 && train_frac < 1.0)) {
        throw ConfigError("linear_probe: train_frac must be in (0,1)");
    }
    int k = 0;
    for (int lab : fm.labels) {
        if (lab < 0) throw DomainError("linear_probe: negative label");
        k = std::max(k, lab + 1);
    }
    {
        std::vector<bool> seen(k, false);
        for (int lab : fm.labels) seen[lab] = true;
        int classes = 0;
        for (bool s : seen) classes += s;
        if (classes < 2) throw DomainError("linear_probe: single-class input");
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.next_unit() * (i + 1));
        if (j > i) j = i;
        std::swap(order[i], order[j]);
    }
    int n_train = static_cast<int>(train_frac * n);
    n_train = std::clamp(n_train, 1, n - 1);
    const int n_test = n - n_train;

    const auto& X = fm.features.values();
    std::vector<double> w(static_cast<size_t>(f) * k, 0.0);
    std::vector<double> b(k, 0.0);
    const double lr_w = 0.1 / static_cast<double>(f);
    const double lr_b = 0.1;

    std::vector<double> logits(k), probs(k);
    std::vector<double> gw(static_cast<size_t>(f) * k), gb(k);
    for (int step = 0; step < 500; ++step) {
        std::fill(gw.begin(), gw.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (int ti = 0; ti < n_train; ++ti) {
            const int i = order[ti];
            const double* xi = &X[static_cast<size_t>(i) * f];
            for (int c = 0; c < k; ++c) {
                double acc = b[c];
                for (int j = 0; j < f; ++j) acc += xi[j] * w[static_cast<size_t>(j) * k + c];
                logits[c] = acc;
            }
            const double mx = *std::max_element(logits.begin(), logits.end());
            double z = 0.0;
            for (int c = 0; c < k; ++c) {
                probs[c] = std::exp(logits[c] - mx);
                z += probs[c];
            }
            for (int c = 0; c < k; ++c) {
                double g = probs[c] / z - (fm.labels[i] == c ? 1.0 : 0.0);
                gb[c] += g;
                for (int j = 0; j < f; ++j) gw[static_cast<size_t>(j) * k + c] += xi[j] * g;
            }
        }
        const double inv_n = 1.0 / n_train;
        for (int c = 0; c < k; ++c) b[c] -= lr_b * gb[c] * inv_n;
        for (size_t jn = 0; jn < w.size(); ++jn) w[jn] -= lr_w * gw[jn] * inv_n;
    }

    int correct = 0;
    for (int ti = n_train; ti < n; ++ti) {
        const int i = order[ti];
        const double* xi = &X[static_cast<size_t>(i) * f];
        int best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            double acc = b[c];
            for (int j = 0; j < f; ++j) acc += xi[j] * w[static_cast<size_t>(j) * k + c];
            if (acc > best_v) {
                best_v = acc;
                best = c;
            }
        }
        if (best == fm.labels[i]) correct += 1;
    }
    return static_cast<double>(correct) / n_test;
}

// ---- PCA embedding ------------------------------------------------------------

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix; returns eigenvalues
// and column eigenvectors. Deterministic sweep order.
void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& eigvals,
                  std::vector<double>& vecs) {
    vecs.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) vecs[static_cast<size_t>(i) * n + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                off += a[static_cast<size_t>(p) * n + q] * a[static_cast<size_t>(p) * n + q];
            }
        }
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[static_cast<size_t>(p) * n + q];
                if (apq == 0.0) continue;
                const double app = a[static_cast<size_t>(p) * n + p];
                const double aqq = a[static_cast<size_t>(q) * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double sign = theta >= 0.0 ? 1.0 : -1.0;
                const double t =
                    sign / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a[static_cast<size_t>(i) * n + p];
                    const double aiq = a[static_cast<size_t>(i) * n + q];
                    a[static_cast<size_t>(i) * n + p] = c * aip - s * aiq;
                    a[static_cast<size_t>(i) * n + q] = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a[static_cast<size_t>(p) * n + i];
                    const double aqi = a[static_cast<size_t>(q) * n + i];
                    a[static_cast<size_t>(p) * n + i] = c * api - s * aqi;
                    a[static_cast<size_t>(q) * n + i] = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = vecs[static_cast<size_t>(i) * n + p];
                    const double viq = vecs[static_cast<size_t>(i) * n + q];
                    vecs[static_cast<size_t>(i) * n + p] = c * vip - s * viq;
                    vecs[static_cast<size_t>(i) * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    eigvals.resize(n);
    for (int i = 0; i < n; ++i) eigvals[i] = a[static_cast<size_t>(i) * n + i];
}

}  // namespace

Embedding2D embed_2d(const FeatureMatrix& fm) {
    const int n = fm.features.shape()[0];
    const int f = fm.features.shape()[1];
    if (n < 3) throw ShapeError("embed_2d: need n >= 3");
    if (f < 2) throw ShapeError("embed_2d: need f >= 2");

    const auto& X = fm.features.values();
    std::vector<double> mean(f, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < f; ++j) mean[j] += X[static_cast<size_t>(i) * f + j];
    }
    for (double& m : mean) m /= n;
    std::vector<double> xc(X.size());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < f; ++j) {
            xc[static_cast<size_t>(i) * f + j] = X[static_cast<size_t>(i) * f + j] - mean[j];
        }
    }

    std::vector<double> cov(static_cast<size_t>(f) * f, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* row = &xc[static_cast<size_t>(i) * f];
        for (int p = 0; p < f; ++p) {
            for (int q = p; q < f; ++q) {
                cov[static_cast<size_t>(p) * f + q] += row[p] * row[q];
            }
        }
    }
    for (int p = 0; p < f; ++p) {
        for (int q = p; q < f; ++q) {
            cov[static_cast<size_t>(p) * f + q] /= (n - 1);
            cov[static_cast<size_t>(q) * f + p] = cov[static_cast<size_t>(p) * f + q];
        }
    }

    Embedding2D emb;
    for (int p = 0; p < f; ++p) emb.total_variance += cov[static_cast<size_t>(p) * f + p];
    if (emb.total_variance == 0.0) {
        emb.degenerate = true;
        emb.points = Tensor::zeros({n, 2});
        return emb;
    }

    std::vector<double> eigvals, vecs;
    jacobi_eigen(cov, f, eigvals, vecs);
    std::vector<int> idx(f);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return eigvals[a] > eigvals[b]; });

    std::vector<double> comps(static_cast<size_t>(f) * 2);
    for (int c = 0; c < 2; ++c) {
        const int col = idx[c];
        emb.explained_variance[c] = eigvals[col];
        // sign convention: largest-magnitude coordinate positive
        int arg = 0;
        double best = 0.0;
        for (int j = 0; j < f; ++j) {
            const double mag = std::abs(vecs[static_cast<size_t>(j) * f + col]);
            if (mag > best) {
                best = mag;
                arg = j;
            }
        }
        const double flip = vecs[static_cast<size_t>(arg) * f + col] < 0.0 ? -1.0 : 1.0;
        for (int j = 0; j < f; ++j) {
            comps[static_cast<size_t>(j) * 2 + c] =
                flip * vecs[static_cast<size_t>(j) * f + col];
        }
    }

    std::vector<double> pts(static_cast<size_t>(n) * 2, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* row = &xc[static_cast<size_t>(i) * f];
        for (int c = 0; c < 2; ++c) {
            double acc = 0.0;
            for (int j = 0; j < f; ++j) acc += row[j] * comps[static_cast<size_t>(j) * 2 + c];
            pts[static_cast<size_t>(i) * 2 + c] = acc;
        }
    }
    emb.points = Tensor::from_values({n, 2}, std::move(pts));
    return emb;
}

double cluster_purity(const Embedding2D& emb, const std::vector<int>& labels) {
    const int n = emb.points.shape()[0];
    if (static_cast<int>(labels.size()) != n) {
        throw ShapeError("cluster_purity: labels do not match embedding");
    }
    int k = 0;
    for (int lab : labels) k = std::max(k, lab + 1);
    if (k < 1) throw DomainError("cluster_purity: no labels");
    const auto& P = emb.points.values();

    // class-mean init keeps the clustering deterministic
    std::vector<double> cx(k, 0.0), cy(k, 0.0);
    std::vector<int> cnt(k, 0);
    for (int i = 0; i < n; ++i) {
        cx[labels[i]] += P[2 * i];
        cy[labels[i]] += P[2 * i + 1];
        cnt[labels[i]] += 1;
    }
    for (int c = 0; c < k; ++c) {
        if (cnt[c] > 0) {
            cx[c] /= cnt[c];
            cy[c] /= cnt[c];
        }
    }
    std::vector<int> assign(n, 0);
    for (int it = 0; it < 100; ++it) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double dx = P[2 * i] - cx[c];
                const double dy = P[2 * i + 1] - cy[c];
                const double d = dx * dx + dy * dy;
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        std::fill(cx.begin(), cx.end(), 0.0);
        std::fill(cy.begin(), cy.end(), 0.0);
        std::fill(cnt.begin(), cnt.end(), 0);
        for (int i = 0; i < n; ++i) {
            cx[assign[i]] += P[2 * i];
            cy[assign[i]] += P[2 * i + 1];
            cnt[assign[i]] += 1;
        }
        for (int c = 0; c < k; ++c) {
            if (cnt[c] > 0) {
                cx[c] /= cnt[c];
                cy[c] /= cnt[c];
            }
        }
    }

    // purity: majority label mass per cluster
    std::vector<std::vector<int>> table(k, std::vector<int>(k, 0));
    for (int i = 0; i < n; ++i) table[assign[i]][labels[i]] += 1;
    int64_t major = 0;
    for (int c = 0; c < k; ++c) {
        major += *std::max_element(table[c].begin(), table[c].end());
    }
    return static_cast<double>(major) / n;
}

// ---- interpolation ------------------------------------------------------------

InterpolationTrace interpolate(const AgentBundle& bundle, int which, InterpKind kind,
                               const Tensor& a, const Tensor& b, int steps,
                               const Tensor& fixed_other) {
    if (steps < 2) throw ConfigError("interpolate: steps must be >= 2");
    const MessageMode mode = bundle.objective.message_mode;
    if (kind == InterpKind::message_interp && mode == MessageMode::none) {
        throw SemanticError("interpolate: message interpolation with message_mode none");
    }
    if (a.shape() != b.shape() || a.shape().size() != 1) {
        throw ShapeError("interpolate: endpoints must be equal-shape vectors");
    }
    const int dim = a.shape()[0];
    const int noise_dim = bundle.noise1.dim;
    const int interp_dim = kind == InterpKind::noise_interp ? noise_dim : bundle.msg_dim;
    if (dim != interp_dim) {
        throw ShapeError("interpolate: endpoint dim " + std::to_string(dim) +
                         " does not match " + std::to_string(interp_dim));
    }
    const bool needs_msg = mode != MessageMode::none;
    if (kind == InterpKind::noise_interp && needs_msg) {
        if (!fixed_other.defined() || fixed_other.numel() != bundle.msg_dim) {
            throw ShapeError("interpolate: fixed message of msg_dim required");
        }
    }
    if (kind == InterpKind::message_interp) {
        if (!fixed_other.defined() || fixed_other.numel() != noise_dim) {
            throw ShapeError("interpolate: fixed noise of noise_dim required");
        }
    }

    Tape::NoGrad ng;
    const int data_dim = bundle.g1.out_dim();
    std::vector<double> gens(static_cast<size_t>(steps) * data_dim);
    for (int t = 0; t < steps; ++t) {
        std::vector<double> x(dim);
        if (t == 0) {
            x = a.values();
        } else if (t == steps - 1) {
            x = b.values();  // exact endpoint, not a + 1.0*(b-a)
        } else {
            const double alpha = static_cast<double>(t) / (steps - 1);
            for (int j = 0; j < dim; ++j) {
                x[j] = a.values()[j] + alpha * (b.values()[j] - a.values()[j]);
            }
        }
        Tensor z, msg;
        if (kind == InterpKind::noise_interp) {
            z = Tensor::from_values({1, dim}, x);
            if (needs_msg) msg = Tensor::from_values({1, bundle.msg_dim}, fixed_other.values());
        } else {
            z = Tensor::from_values({1, noise_dim}, fixed_other.values());
            msg = Tensor::from_values({1, dim}, x);
        }
        Tensor gen = generator_forward(bundle, which, z, msg);
        std::copy(gen.values().begin(), gen.values().end(),
                  gens.begin() + static_cast<size_t>(t) * data_dim);
    }

    InterpolationTrace trace;
    trace.kind = kind;
    trace.which_generator = which;
    trace.a = a.detach();
    trace.b = b.detach();
    trace.steps = steps;
    trace.generations = Tensor::from_values({steps, data_dim}, std::move(gens));
    return trace;
}

void export_trace_csv(const InterpolationTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const int d = trace.generations.shape()[1];
    out << "step";
    for (int j = 0; j < d; ++j) out << ",x" << j;
    out << "\n";
    const auto& v = trace.generations.values();
    char buf[40];
    for (int t = 0; t < trace.steps; ++t) {
        out << t;
        for (int j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof(buf), ",%.6g", v[static_cast<size_t>(t) * d + j]);
            out << buf;
        }
        out << "\n";
    }
}

}  // namespace mpmgan
