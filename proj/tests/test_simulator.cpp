#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "pgnlm/analysis.hpp"
#include "pgnlm/core.hpp"
#include "pgnlm/simulator.hpp"

using namespace pgnlm;
using cd = std::complex<double>;

namespace {

HermitianMatrix3D sample_covariance(const HermitianMatrix3D& sigma, int n, std::uint64_t seed) {
    sim::Rng rng = sim::substream(seed, 9, 0);
    HermitianMatrix3D acc = HermitianMatrix3D::Zero();
    for (int i = 0; i < n; ++i)
        acc += outer_product(sim::sample_target_vector(sigma, rng));
    return acc / static_cast<double>(n);
}

} // namespace

TEST(Rng, UniformIsInHalfOpenUnitInterval) {
    sim::Rng rng = sim::substream(1, 0, 0);
    for (int i = 0; i < 10000; ++i) {
        const double u = sim::uniform_open0(rng);
        ASSERT_GT(u, 0.0);
        ASSERT_LE(u, 1.0);
    }
}

TEST(Rng, SubstreamsAreReproducibleAndDistinct) {
    sim::Rng a = sim::substream(42, 0, 3), b = sim::substream(42, 0, 3);
    sim::Rng c = sim::substream(42, 1, 3), d = sim::substream(42, 0, 4);
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
    EXPECT_NE(x, d());
}

TEST(Rng, CircularGaussianMoments) {
    sim::Rng rng = sim::substream(5, 0, 0);
    const int n = 100000;
    double re = 0, im = 0, p = 0, cross = 0;
    for (int i = 0; i < n; ++i) {
        const cd z = sim::standard_circular(rng);
        re += z.real();
        im += z.imag();
        p += std::norm(z);
        cross += z.real() * z.imag();
    }
    EXPECT_NEAR(re / n, 0.0, 0.01);
    EXPECT_NEAR(im / n, 0.0, 0.01);
    EXPECT_NEAR(p / n, 1.0, 0.02);
    EXPECT_NEAR(cross / n, 0.0, 0.01);
}

TEST(SampleTargetVector, IdentityCovariance) {
    const HermitianMatrix3D c = sample_covariance(HermitianMatrix3D::Identity(), 100000, 1);
    EXPECT_LT((c - HermitianMatrix3D::Identity()).norm(), 0.02);
}

TEST(SampleTargetVector, DiagonalPower) {
    HermitianMatrix3D sigma = HermitianMatrix3D::Zero();
    sigma.diagonal() << 4.0, 1.0, 1.0;
    const HermitianMatrix3D c = sample_covariance(sigma, 100000, 2);
    EXPECT_NEAR(c(0, 0).real(), 4.0, 0.03 * 4.0);
}

TEST(SampleTargetVector, ZeroMean) {
    sim::Rng rng = sim::substream(3, 0, 0);
    TargetVectorD mean = TargetVectorD::Zero();
    const int n = 100000;
    for (int i = 0; i < n; ++i)
        mean += sim::sample_target_vector(sim::reference_sigma(), rng);
    mean /= static_cast<double>(n);
    EXPECT_LT(mean.norm(), 0.02);
}

TEST(SampleTargetVector, CorrelatedCovarianceWithinFivePercent) {
    const HermitianMatrix3D sigma = sim::reference_sigma();
    const HermitianMatrix3D c = sample_covariance(sigma, 20000, 4);
    EXPECT_LT((c - sigma).norm() / sigma.norm(), 0.05);
}

TEST(SampleTargetVector, NonPositiveDefiniteNamesEigenvalue) {
    HermitianMatrix3D sigma = HermitianMatrix3D::Identity();
    sigma(0, 2) = sigma(2, 0) = 2.0; // eigenvalues -1, 1, 3
    sim::Rng rng = sim::substream(0, 0, 0);
    try {
        sim::sample_target_vector(sigma, rng);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Data);
        EXPECT_NE(std::string(e.what()).find("eigenvalue -1"), std::string::npos) << e.what();
    }
}

TEST(BuiltinScenes, ReferenceSigmaIsPositiveDefinite) {
    const HermitianMatrix3D sigma = sim::reference_sigma();
    EXPECT_EQ(sigma(0, 0), cd(1.0));
    EXPECT_EQ(sigma(1, 1), cd(0.25));
    EXPECT_EQ(sigma(2, 2), cd(1.0));
    EXPECT_EQ(sigma(0, 2), cd(0.5));
    EXPECT_EQ(sigma(2, 0), cd(0.5));
    Eigen::SelfAdjointEigenSolver<HermitianMatrix3D> es(sigma);
    EXPECT_NEAR(es.eigenvalues()(0), 0.25, 1e-12);
    EXPECT_NEAR(es.eigenvalues()(1), 0.5, 1e-12);
    EXPECT_NEAR(es.eigenvalues()(2), 1.5, 1e-12);
}

TEST(BuiltinScenes, Geometry) {
    const auto homog = sim::builtin_scene("homogeneous", 64);
    ASSERT_EQ(homog.classes.size(), 1u);
    EXPECT_EQ(homog.classes[0].sigma, sim::reference_sigma());

    const auto edge = sim::builtin_scene("edge2", 64);
    ASSERT_EQ(edge.classes.size(), 2u);
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c)
            ASSERT_EQ(edge.class_map(r, c), c >= 32 ? 1 : 0);

    const auto pt = sim::builtin_scene("point_target", 64);
    int points = 0;
    for (auto v : pt.class_map)
        points += v;
    EXPECT_EQ(points, 1);
    EXPECT_EQ(pt.class_map(32, 32), 1);
    ASSERT_TRUE(pt.classes[1].fixed.has_value());
    EXPECT_DOUBLE_EQ(std::norm((*pt.classes[1].fixed)(0)) / pt.classes[0].sigma(0, 0).real(), 100.0);

    const auto canopy = sim::builtin_scene("canopy_mosaic", 128, 3);
    ASSERT_TRUE(canopy.group_map.has_value());
    // Every group holds one class.
    std::map<int, int> group_class;
    for (std::size_t i = 0; i < canopy.class_map.size(); ++i) {
        const auto [it, fresh] = group_class.emplace(canopy.group_map->data()[i], canopy.class_map.data()[i]);
        ASSERT_EQ(it->second, canopy.class_map.data()[i]);
    }
    EXPECT_EQ(group_class.size(), 256u);

    EXPECT_THROW(sim::builtin_scene("nope", 64), Error);
    EXPECT_THROW(sim::builtin_scene("edge2", 0), Error);
}

TEST(GenerateScene, ConstantGuideAndSingleLookSpeckle) {
    sim::SceneSpec spec = sim::builtin_scene("homogeneous", 100, 8);
    spec.guide_noise = 0.0;
    const sim::Scene s = sim::generate_scene(spec);
    for (int b = 0; b < spec.bands(); ++b)
        for (int r = 0; r < 100; ++r)
            for (int c = 0; c < 100; ++c)
                ASSERT_EQ(s.guide(r, c, b), spec.classes[0].guide_mean(b));
    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> intensity;
        for (const auto& v : s.slc)
            intensity.push_back(std::norm(v(ch)));
        EXPECT_NEAR(analysis::enl(intensity), 1.0, 0.1) << "channel " << ch;
    }
}

TEST(GenerateScene, PerClassCovarianceWithinFivePercent) {
    const sim::SceneSpec spec = sim::builtin_scene("edge2", 160, 21);
    const sim::Scene s = sim::generate_scene(spec);
    std::vector<HermitianMatrix3D> acc(2, HermitianMatrix3D::Zero());
    std::vector<int> n(2, 0);
    for (std::size_t i = 0; i < s.slc.size(); ++i) {
        const int k = s.class_map.data()[i];
        acc[k] += outer_product(s.slc.data()[i]);
        ++n[k];
    }
    for (int k = 0; k < 2; ++k) {
        ASSERT_GE(n[k], 10000);
        const HermitianMatrix3D& sigma = spec.classes[k].sigma;
        EXPECT_LT((acc[k] / double(n[k]) - sigma).norm() / sigma.norm(), 0.05) << "class " << k;
    }
}

TEST(GenerateScene, DeterministicAcrossRunsAndThreads) {
    const auto spec = sim::builtin_scene("canopy_mosaic", 64, 77);
    const sim::Scene a = sim::generate_scene(spec, 1);
    const sim::Scene b = sim::generate_scene(spec, 3);
    EXPECT_EQ(a.slc, b.slc);
    EXPECT_EQ(a.guide, b.guide);
    EXPECT_EQ(a.class_map, b.class_map);
    const sim::Scene c = sim::generate_scene(sim::builtin_scene("canopy_mosaic", 64, 78), 1);
    EXPECT_FALSE(a.slc == c.slc);
}

TEST(GenerateScene, PointTargetIsExact) {
    const sim::Scene s = sim::generate_scene(sim::builtin_scene("point_target", 32, 1));
    EXPECT_EQ(s.slc(16, 16), TargetVectorD(10.0, 5.0, 10.0));
}

TEST(GenerateScene, SpecValidation) {
    sim::SceneSpec spec = sim::builtin_scene("edge2", 16, 1);
    sim::SceneSpec bad_class = spec;
    bad_class.class_map(0, 0) = 7;
    EXPECT_THROW(sim::generate_scene(bad_class), Error);
    sim::SceneSpec bad_noise = spec;
    bad_noise.guide_noise = -1.0;
    EXPECT_THROW(sim::generate_scene(bad_noise), Error);
    sim::SceneSpec bad_sigma = spec;
    bad_sigma.classes[1].sigma(1, 1) = -3.0;
    EXPECT_THROW(sim::generate_scene(bad_sigma), Error);
    sim::SceneSpec bad_geom = spec;
    bad_geom.width = 17;
    try {
        sim::generate_scene(bad_geom);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Geometry);
    }
}

TEST(Metadata, RoundTripsTruth) {
    const auto spec = sim::builtin_scene("canopy_mosaic", 64, 0xDEADBEEFCAFEull);
    std::stringstream ss;
    sim::write_metadata(ss, spec);
    const auto truth = sim::read_metadata(ss);
    EXPECT_EQ(truth.name, "canopy_mosaic");
    EXPECT_EQ(truth.seed, 0xDEADBEEFCAFEull);
    EXPECT_EQ(truth.height, 64);
    EXPECT_EQ(truth.width, 64);
    ASSERT_EQ(truth.sigma.size(), 2u);
    EXPECT_EQ(truth.sigma[0], spec.classes[0].sigma);
    EXPECT_EQ(truth.sigma[1], spec.classes[1].sigma);
}

TEST(Metadata, MalformedInput) {
    std::stringstream ss("name=x\nseed=1\n");
    EXPECT_THROW(sim::read_metadata(ss), Error);
}
