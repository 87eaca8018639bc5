#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mpmgan/eval.hpp"

using namespace mpmgan;

namespace {

SyntheticDataset ring8_dataset(double sigma = 0.02) {
    Rng rng(77);
    return make_ring_mixture(8, 2.0, sigma, 256, rng);
}

TrainConfig eval_config(MessageMode mm) {
    TrainConfig cfg;
    cfg.objective = {GeneratorMode::vanilla, mm};
    cfg.dims = {4, 8, 2, 16};
    cfg.dataset.kind = "ring";
    cfg.dataset.n = 256;
    cfg.batch = 8;
    cfg.seed = 9;
    cfg.output_dir = "/tmp/mpmgan_eval_test";
    return cfg;
}

}  // namespace

TEST_CASE("mode coverage on canonical sample sets") {
    SyntheticDataset ds = ring8_dataset();

    SUBCASE("samples exactly at all centers") {
        std::vector<double> pts;
        for (int rep = 0; rep < 10; ++rep) {
            for (const auto& c : ds.centers) {
                pts.push_back(c[0]);
                pts.push_back(c[1]);
            }
        }
        ModeCoverageReport rep =
            mode_coverage(Tensor::from_values({80, 2}, pts), ds, 0.01);
        CHECK(rep.modes_covered == 8);
        CHECK(rep.high_quality_fraction == doctest::Approx(1.0));
    }
    SUBCASE("total collapse onto one center") {
        std::vector<double> pts;
        for (int i = 0; i < 50; ++i) {
            pts.push_back(ds.centers[0][0]);
            pts.push_back(ds.centers[0][1]);
        }
        ModeCoverageReport rep =
            mode_coverage(Tensor::from_values({50, 2}, pts), ds, 0.01);
        CHECK(rep.modes_covered == 1);
        CHECK(rep.covered_modes == std::vector<int>{0});
    }
    SUBCASE("samples far from every mode") {
        std::vector<double> pts;
        for (int i = 0; i < 64; ++i) {
            const double a = 2.0 * 3.14159265358979 * i / 64;
            pts.push_back(10.0 * std::cos(a));
            pts.push_back(10.0 * std::sin(a));
        }
        ModeCoverageReport rep =
            mode_coverage(Tensor::from_values({64, 2}, pts), ds, 0.01);
        CHECK(rep.modes_covered == 0);
        CHECK(rep.high_quality_fraction == 0.0);
    }
    SUBCASE("dataset without centers is rejected") {
        SyntheticDataset no_centers;
        no_centers.kind = "raw";
        no_centers.samples = ds.samples;
        no_centers.sigma = 0.1;
        CHECK_THROWS_AS(mode_coverage(ds.samples, no_centers, 0.01), DomainError);
        CHECK_THROWS_AS(mode_coverage(ds.samples, ds, 0.0), ConfigError);
    }
}

TEST_CASE("mode coverage is permutation invariant and monotone") {
    SyntheticDataset ds = ring8_dataset();
    Rng rng(123);
    const int n = 200;
    std::vector<double> pts(2 * n);
    for (double& v : pts) v = 4.0 * rng.uniform_pm1();

    ModeCoverageReport base = mode_coverage(Tensor::from_values({n, 2}, pts), ds, 0.01);

    // permute rows
    std::vector<double> shuffled = pts;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_unit() * (i + 1));
        std::swap(shuffled[2 * i], shuffled[2 * j]);
        std::swap(shuffled[2 * i + 1], shuffled[2 * j + 1]);
    }
    ModeCoverageReport perm =
        mode_coverage(Tensor::from_values({n, 2}, shuffled), ds, 0.01);
    CHECK(perm.per_mode_fraction == base.per_mode_fraction);

    // adding a sample inside mode 3's radius never lowers its count
    std::vector<double> grown = pts;
    grown.push_back(ds.centers[3][0]);
    grown.push_back(ds.centers[3][1]);
    ModeCoverageReport more =
        mode_coverage(Tensor::from_values({n + 1, 2}, grown), ds, 0.01);
    CHECK(more.per_mode_fraction[3] * (n + 1) >= base.per_mode_fraction[3] * n);
}

TEST_CASE("feature extraction dimensions and frozen-parameter guarantee") {
    TrainConfig cfg = eval_config(MessageMode::conditioned_message_passing);
    AgentBundle bundle(cfg);
    SyntheticDataset ds = ring8_dataset();

    const auto before_w = bundle.d.layers()[0].weight.values();
    FeatureMatrix disc = extract_features(bundle, ds.samples, ds.labels,
                                          FeatureSource::discriminator_penultimate);
    CHECK(disc.features.shape() == Shape{256, 16});  // hidden width
    FeatureMatrix msg =
        extract_features(bundle, ds.samples, ds.labels, FeatureSource::message_generator);
    CHECK(msg.features.shape() == Shape{256, 8});  // msg_dim
    FeatureMatrix both =
        extract_features(bundle, ds.samples, ds.labels, FeatureSource::concatenated);
    CHECK(both.features.shape() == Shape{256, 24});
    CHECK(bundle.d.layers()[0].weight.values() == before_w);
    CHECK_FALSE(disc.features.requires_grad());
}

TEST_CASE("linear probe separates well-separated blobs") {
    // three blobs 10 sigma apart, true coordinates as features
    Rng rng(5);
    const double sigma = 0.1;  // centers 10 sigma apart
    SyntheticDataset ds = make_labeled_blobs(
        {{0.0, 0.0}, {10 * sigma, 0.0}, {0.0, 10 * sigma}}, sigma, 600, rng);
    FeatureMatrix fm{ds.samples, FeatureSource::discriminator_penultimate, ds.labels};
    const double acc = linear_probe(fm, 0.7, 42);

    // nearest-centroid oracle on the same data
    int correct = 0;
    const auto& v = ds.samples.values();
    for (int i = 0; i < ds.n(); ++i) {
        int best = 0;
        double best_d = 1e300;
        for (int j = 0; j < ds.k(); ++j) {
            const double dx = v[2 * i] - ds.centers[j][0];
            const double dy = v[2 * i + 1] - ds.centers[j][1];
            if (dx * dx + dy * dy < best_d) {
                best_d = dx * dx + dy * dy;
                best = j;
            }
        }
        correct += best == ds.labels[i];
    }
    const double oracle_acc = static_cast<double>(correct) / ds.n();
    CHECK(oracle_acc >= 0.99);
    CHECK(acc >= 0.99);
}

TEST_CASE("linear probe on shuffled labels sits at chance") {
    Rng rng(6);
    SyntheticDataset ds =
        make_labeled_blobs({{0, 0}, {5, 0}, {0, 5}}, 0.1, 900, rng);
    std::vector<int> shuffled = ds.labels;
    for (int i = static_cast<int>(shuffled.size()) - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_unit() * (i + 1));
        std::swap(shuffled[i], shuffled[j]);
    }
    FeatureMatrix fm{ds.samples, FeatureSource::discriminator_penultimate, shuffled};
    const double acc = linear_probe(fm, 0.7, 17);
    CHECK(acc > 1.0 / 3.0 - 0.1);
    CHECK(acc < 1.0 / 3.0 + 0.1);
}

TEST_CASE("duplicating every feature column leaves probe predictions unchanged") {
    Rng rng(8);
    SyntheticDataset ds =
        make_labeled_blobs({{0, 0}, {1.2, 0}, {0, 1.2}}, 0.45, 300, rng);  // overlapping
    FeatureMatrix fm{ds.samples, FeatureSource::discriminator_penultimate, ds.labels};

    const int n = ds.n();
    std::vector<double> dup(static_cast<size_t>(n) * 4);
    const auto& src = ds.samples.values();
    for (int i = 0; i < n; ++i) {
        dup[4 * i] = src[2 * i];
        dup[4 * i + 1] = src[2 * i + 1];
        dup[4 * i + 2] = src[2 * i];
        dup[4 * i + 3] = src[2 * i + 1];
    }
    FeatureMatrix fm_dup{Tensor::from_values({n, 4}, dup),
                         FeatureSource::discriminator_penultimate, ds.labels};
    for (uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        CHECK(linear_probe(fm, 0.7, seed) == linear_probe(fm_dup, 0.7, seed));
    }
}

TEST_CASE("probe accuracy on chance data stays near 1/k across seeds") {
    const int k = 3;
    const int n = 600;
    int outside = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(1000 + seed);
        std::vector<double> feats(static_cast<size_t>(n) * 8);
        for (double& v : feats) v = rng.normal();
        std::vector<int> labels(n);
        for (int& lab : labels) lab = static_cast<int>(rng.next_unit() * k) % k;
        FeatureMatrix fm{Tensor::from_values({n, 8}, feats),
                         FeatureSource::message_generator, labels};
        const double acc = linear_probe(fm, 0.7, seed);
        const double n_test = n - static_cast<int>(0.7 * n);
        const double sigma = std::sqrt((1.0 / k) * (1 - 1.0 / k) / n_test);
        if (std::abs(acc - 1.0 / k) > 3 * sigma) outside += 1;
    }
    CHECK(outside <= 1);  // 3-sigma bound, allow one excursion in 20
}

TEST_CASE("probe rejects degenerate inputs") {
    std::vector<int> one_class(10, 0);
    FeatureMatrix fm{Tensor::zeros({10, 2}), FeatureSource::message_generator, one_class};
    CHECK_THROWS_AS(linear_probe(fm, 0.7, 1), DomainError);
    std::vector<int> two(10, 0);
    two[1] = 1;
    FeatureMatrix fm2{Tensor::zeros({10, 2}), FeatureSource::message_generator, two};
    CHECK_THROWS_AS(linear_probe(fm2, 0.0, 1), ConfigError);
}

TEST_CASE("embed_2d on structured inputs") {
    SUBCASE("rank-1 data leaves nothing for the second component") {
        Rng rng(3);
        const int n = 200;
        std::vector<double> feats(static_cast<size_t>(n) * 5);
        for (int i = 0; i < n; ++i) {
            const double t = rng.normal();
            const double dir[5] = {0.5, -1.0, 2.0, 0.25, -0.75};
            for (int j = 0; j < 5; ++j) feats[static_cast<size_t>(i) * 5 + j] = t * dir[j];
        }
        FeatureMatrix fm{Tensor::from_values({n, 5}, feats),
                         FeatureSource::message_generator, std::vector<int>(n, 0)};
        Embedding2D emb = embed_2d(fm);
        CHECK_FALSE(emb.degenerate);
        CHECK(emb.explained_variance[1] < 1e-10 * emb.total_variance);
    }
    SUBCASE("isotropic 2-d cloud splits variance evenly, against a closed-form oracle") {
        Rng rng(4);
        const int n = 4000;
        std::vector<double> feats(static_cast<size_t>(n) * 2);
        for (double& v : feats) v = rng.normal();
        FeatureMatrix fm{Tensor::from_values({n, 2}, feats),
                         FeatureSource::message_generator, std::vector<int>(n, 0)};
        Embedding2D emb = embed_2d(fm);

        // closed-form eigenvalues of the 2x2 sample covariance
        double mx = 0, my = 0;
        for (int i = 0; i < n; ++i) {
            mx += feats[2 * i];
            my += feats[2 * i + 1];
        }
        mx /= n;
        my /= n;
        double sxx = 0, syy = 0, sxy = 0;
        for (int i = 0; i < n; ++i) {
            const double dx = feats[2 * i] - mx, dy = feats[2 * i + 1] - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        sxx /= n - 1;
        syy /= n - 1;
        sxy /= n - 1;
        const double tr = sxx + syy;
        const double det = sxx * syy - sxy * sxy;
        const double disc = std::sqrt(tr * tr / 4 - det);
        const double l1 = tr / 2 + disc, l2 = tr / 2 - disc;
        CHECK(emb.explained_variance[0] == doctest::Approx(l1).epsilon(1e-9));
        CHECK(emb.explained_variance[1] == doctest::Approx(l2).epsilon(1e-9));
        // eigenvalue concentration: split roughly even for isotropic data
        CHECK(emb.explained_variance[0] / emb.explained_variance[1] < 1.2);
    }
    SUBCASE("centered axis-aligned 2-d data embeds as itself up to convention") {
        std::vector<double> feats = {2.0, 0.1, -2.0, 0.1, 2.0, -0.1, -2.0, -0.1};
        FeatureMatrix fm{Tensor::from_values({4, 2}, feats),
                         FeatureSource::message_generator, std::vector<int>(4, 0)};
        Embedding2D emb = embed_2d(fm);
        for (int i = 0; i < 4; ++i) {
            CHECK(emb.points.values()[2 * i] == doctest::Approx(feats[2 * i]).epsilon(1e-12));
            CHECK(emb.points.values()[2 * i + 1] ==
                  doctest::Approx(feats[2 * i + 1]).epsilon(1e-12));
        }
    }
    SUBCASE("constant offset does not change the embedding") {
        Rng rng(10);
        const int n = 100;
        std::vector<double> feats(static_cast<size_t>(n) * 3);
        for (double& v : feats) v = rng.normal();
        std::vector<double> shifted = feats;
        for (int i = 0; i < n; ++i) {
            shifted[3 * i] += 5.0;
            shifted[3 * i + 1] -= 2.0;
            shifted[3 * i + 2] += 0.5;
        }
        FeatureMatrix a{Tensor::from_values({n, 3}, feats),
                        FeatureSource::message_generator, std::vector<int>(n, 0)};
        FeatureMatrix b{Tensor::from_values({n, 3}, shifted),
                        FeatureSource::message_generator, std::vector<int>(n, 0)};
        Embedding2D ea = embed_2d(a), eb = embed_2d(b);
        for (int i = 0; i < 2 * n; ++i) {
            CHECK(ea.points.values()[i] ==
                  doctest::Approx(eb.points.values()[i]).epsilon(1e-6));
        }
    }
    SUBCASE("zero-variance input is flagged degenerate") {
        FeatureMatrix fm{Tensor::full({5, 3}, 1.25), FeatureSource::message_generator,
                         std::vector<int>(5, 0)};
        Embedding2D emb = embed_2d(fm);
        CHECK(emb.degenerate);
        for (double v : emb.points.values()) CHECK(v == 0.0);
    }
    SUBCASE("shape preconditions") {
        FeatureMatrix tiny{Tensor::zeros({2, 4}), FeatureSource::message_generator,
                           {0, 1}};
        CHECK_THROWS_AS(embed_2d(tiny), ShapeError);
        FeatureMatrix thin{Tensor::zeros({5, 1}), FeatureSource::message_generator,
                           {0, 1, 0, 1, 0}};
        CHECK_THROWS_AS(embed_2d(thin), ShapeError);
    }
}

TEST_CASE("cluster purity of separated blobs is high") {
    Rng rng(12);
    SyntheticDataset ds = make_labeled_blobs({{0, 0}, {6, 0}, {0, 6}}, 0.2, 300, rng);
    FeatureMatrix fm{ds.samples, FeatureSource::message_generator, ds.labels};
    Embedding2D emb = embed_2d(fm);
    CHECK(cluster_purity(emb, ds.labels) > 0.95);
}

TEST_CASE("interpolation traces") {
    TrainConfig cfg = eval_config(MessageMode::conditioned_message_passing);
    AgentBundle bundle(cfg);
    Rng rng(21);
    Tensor a = Tensor::from_values({4}, {0.1, -0.3, 0.8, -0.9});
    Tensor b = Tensor::from_values({4}, {-0.5, 0.2, -0.1, 0.4});
    Tensor fixed_msg = Tensor::from_values({8}, std::vector<double>(8, 0.05));
    Tensor fixed_noise = Tensor::from_values({4}, {0.2, 0.2, -0.2, -0.2});

    SUBCASE("steps=2 is exactly the endpoint pair") {
        InterpolationTrace tr =
            interpolate(bundle, 1, InterpKind::noise_interp, a, b, 2, fixed_msg);
        Tape::NoGrad ng;
        Tensor da = generator_forward(
            bundle, 1, Tensor::from_values({1, 4}, a.values()),
            Tensor::from_values({1, 8}, fixed_msg.values()));
        Tensor db = generator_forward(
            bundle, 1, Tensor::from_values({1, 4}, b.values()),
            Tensor::from_values({1, 8}, fixed_msg.values()));
        CHECK(tr.generations.values()[0] == da.values()[0]);
        CHECK(tr.generations.values()[1] == da.values()[1]);
        CHECK(tr.generations.values()[2] == db.values()[0]);
        CHECK(tr.generations.values()[3] == db.values()[1]);
    }
    SUBCASE("equal endpoints give a constant path") {
        InterpolationTrace tr =
            interpolate(bundle, 2, InterpKind::noise_interp, a, a, 7, fixed_msg);
        for (int t = 1; t < 7; ++t) {
            CHECK(tr.generations.values()[2 * t] == tr.generations.values()[0]);
            CHECK(tr.generations.values()[2 * t + 1] == tr.generations.values()[1]);
        }
    }
    SUBCASE("message interpolation endpoints are exact") {
        Tensor ma = Tensor::from_values({8}, std::vector<double>(8, -0.4));
        Tensor mb = Tensor::from_values({8}, std::vector<double>(8, 0.6));
        InterpolationTrace tr =
            interpolate(bundle, 1, InterpKind::message_interp, ma, mb, 5, fixed_noise);
        Tape::NoGrad ng;
        Tensor da = generator_forward(
            bundle, 1, Tensor::from_values({1, 4}, fixed_noise.values()),
            Tensor::from_values({1, 8}, ma.values()));
        CHECK(tr.generations.values()[0] == da.values()[0]);
        CHECK(tr.generations.values()[1] == da.values()[1]);
    }
    SUBCASE("a linear generator produces collinear traces") {
        TrainConfig lcfg = eval_config(MessageMode::none);
        AgentBundle lb(lcfg);
        for (auto& layer : lb.g1.layers()) layer.act = Activation::identity;
        Tensor na = Tensor::from_values({4}, {1.0, 0.0, -1.0, 0.5});
        Tensor nb = Tensor::from_values({4}, {-1.0, 1.0, 0.0, -0.5});
        InterpolationTrace tr =
            interpolate(lb, 1, InterpKind::noise_interp, na, nb, 9, Tensor());
        const auto& g = tr.generations.values();
        // affine map: trace must equal the interpolation of its endpoints
        for (int t = 0; t < 9; ++t) {
            const double alpha = static_cast<double>(t) / 8.0;
            const double ex = g[0] + alpha * (g[16] - g[0]);
            const double ey = g[1] + alpha * (g[17] - g[1]);
            CHECK(std::abs(g[2 * t] - ex) < 1e-9);
            CHECK(std::abs(g[2 * t + 1] - ey) < 1e-9);
        }
        // cross-product collinearity over consecutive segments
        for (int t = 2; t < 9; ++t) {
            const double ux = g[2 * t] - g[2 * (t - 1)], uy = g[2 * t + 1] - g[2 * t - 1];
            const double vx = g[2 * (t - 1)] - g[2 * (t - 2)],
                         vy = g[2 * t - 1] - g[2 * (t - 2) + 1];
            CHECK(std::abs(ux * vy - uy * vx) < 1e-9);
        }
    }
    SUBCASE("message interpolation requires a message mode") {
        TrainConfig ncfg = eval_config(MessageMode::none);
        AgentBundle nb(ncfg);
        Tensor ma = Tensor::from_values({8}, std::vector<double>(8, 0.0));
        CHECK_THROWS_AS(
            interpolate(nb, 1, InterpKind::message_interp, ma, ma, 4, fixed_noise),
            SemanticError);
    }
    SUBCASE("steps below 2 are rejected") {
        CHECK_THROWS_AS(interpolate(bundle, 1, InterpKind::noise_interp, a, b, 1, fixed_msg),
                        ConfigError);
    }
}
