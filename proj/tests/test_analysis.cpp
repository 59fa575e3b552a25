#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "pgnlm/analysis.hpp"
#include "pgnlm/core.hpp"
#include "pgnlm/estimator.hpp"
#include "pgnlm/simulator.hpp"

using namespace pgnlm;
using namespace pgnlm::analysis;
using cd = std::complex<double>;

namespace {

HermitianMatrix3D diag3(double a, double b, double c) {
    HermitianMatrix3D m = HermitianMatrix3D::Zero();
    m.diagonal() << a, b, c;
    return m;
}

LabeledSet blobs(int per_class, double separation, std::uint64_t seed, int groups_per_class = 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    LabeledSet set;
    set.x.resize(2 * per_class, 3);
    for (int i = 0; i < 2 * per_class; ++i) {
        const int label = i < per_class ? 0 : 1;
        for (int j = 0; j < 3; ++j)
            set.x(i, j) = n(rng) + (label ? separation : 0.0);
        set.labels.push_back(label);
        if (groups_per_class)
            set.groups.push_back(label * groups_per_class + (i % per_class) % groups_per_class);
    }
    return set;
}

} // namespace

TEST(Features, DiagonalMatrix) {
    const FeatureVector f = features_of(diag3(1, 2, 3));
    EXPECT_EQ(f.c11, 1.0);
    EXPECT_EQ(f.c22, 2.0);
    EXPECT_EQ(f.c33, 3.0);
    EXPECT_EQ(f.abs_c13, 0.0);
    EXPECT_EQ(f.arg_c13, 0.0);
}

TEST(Features, Identity) {
    const FeatureVector f = features_of(HermitianMatrix3D::Identity());
    EXPECT_EQ(f.as_vector(), (Eigen::Matrix<double, 5, 1>() << 1, 1, 1, 0, 0).finished());
}

TEST(Features, ComplexC13) {
    HermitianMatrix3D m = diag3(2, 1, 2);
    m(0, 2) = cd(1, 1);
    m(2, 0) = cd(1, -1);
    const FeatureVector f = features_of(m);
    EXPECT_NEAR(f.abs_c13, 1.41421356, 1e-8);
    EXPECT_NEAR(f.arg_c13, std::numbers::pi / 4, 1e-15);
}

TEST(Features, NegativeRealC13MapsToPi) {
    HermitianMatrix3D m = diag3(2, 1, 2);
    m(0, 2) = cd(-1, -0.0);
    m(2, 0) = cd(-1, 0.0);
    EXPECT_EQ(features_of(m).arg_c13, std::numbers::pi);
}

TEST(Features, ReconstructC13) {
    const sim::Scene s = sim::generate_scene(sim::builtin_scene("edge2", 16, 2));
    const auto field = boxcar(s.slc, 1);
    const GuideImageD feats = extract_features(field);
    ASSERT_EQ(feats.bands(), kFeatureCount);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) {
            const cd c13 = field(r, c)(0, 2);
            const cd back = std::polar(feats(r, c, 3), feats(r, c, 4));
            EXPECT_LT(std::abs(back - c13), 1e-12 * std::max(1.0, std::abs(c13)));
            EXPECT_EQ(feats(r, c, 0), field(r, c)(0, 0).real());
        }
}

TEST(Enl, SingleLookAndMultiLook) {
    sim::Rng rng = sim::substream(12, 0, 0);
    std::vector<double> one, four;
    for (int i = 0; i < 10000; ++i) {
        one.push_back(std::norm(sim::standard_circular(rng)));
        double sum = 0.0;
        for (int k = 0; k < 4; ++k)
            sum += std::norm(sim::standard_circular(rng));
        four.push_back(sum / 4.0);
    }
    EXPECT_NEAR(enl(one), 1.0, 0.1);
    EXPECT_NEAR(enl(four), 4.0, 0.4);
}

TEST(Enl, ConstantRegionIsInfinite) {
    const std::vector<double> flat(50, 2.5);
    EXPECT_TRUE(enl_is_infinite(enl(flat)));
}

TEST(Enl, ScaleInvariant) {
    const std::vector<double> v{0.5, 1.0, 4.0, 2.0, 0.25, 3.0};
    std::vector<double> scaled;
    for (double x : v)
        scaled.push_back(4.0 * x);
    EXPECT_EQ(enl(v), enl(scaled));
}

TEST(Enl, Errors) {
    EXPECT_THROW(enl(std::vector<double>{1.0}), Error);
    EXPECT_THROW(enl(std::vector<double>{-1.0, -2.0}), Error);
}

TEST(Enl, RegionExtraction) {
    CovarianceFieldD f(4, 5, HermitianMatrix3D::Identity());
    f(1, 2)(0, 0) = 7.0;
    const auto v = c11_values(f, Region{2, 1, 2, 3});
    ASSERT_EQ(v.size(), 6u);
    EXPECT_EQ(v[0], 7.0);
    EXPECT_THROW(c11_values(f, Region{4, 0, 2, 1}), Error);
}

TEST(MatrixError, TruthGivesZero) {
    const std::vector<HermitianMatrix3D> truth{diag3(1, 2, 3), sim::reference_sigma()};
    const auto spec = sim::builtin_scene("checkerboard", 16);
    CovarianceFieldD est(16, 16);
    for (std::size_t i = 0; i < est.size(); ++i)
        est.data()[i] = truth[spec.class_map.data()[i]];
    const auto e = matrix_error(est, truth, spec.class_map);
    EXPECT_EQ(e.overall, 0.0);
    EXPECT_EQ(e.per_class[0], 0.0);
    EXPECT_EQ(e.counts[0] + e.counts[1], 256u);
}

TEST(MatrixError, SingleLookWorseThanBoxcar) {
    const sim::Scene s = sim::generate_scene(sim::builtin_scene("homogeneous", 64, 4));
    const std::vector<HermitianMatrix3D> truth{sim::reference_sigma()};
    const double single = matrix_error(outer_products(s.slc), truth, s.class_map).overall;
    const double box = matrix_error(boxcar(s.slc, 2), truth, s.class_map).overall;
    EXPECT_GT(single, box);
    // |s s^H - Sigma|_F / |Sigma|_F for single-look data sits well above 1.
    EXPECT_GT(single, 1.0);
}

TEST(MatrixError, MaskAndUnknownClass) {
    const std::vector<HermitianMatrix3D> truth{HermitianMatrix3D::Identity()};
    CovarianceFieldD est(2, 2, HermitianMatrix3D::Identity());
    est(0, 0) = 2.0 * HermitianMatrix3D::Identity();
    LabelImage classes(2, 2, 0);
    LabelImage mask(2, 2, 0);
    mask(1, 1) = 1;
    EXPECT_EQ(matrix_error(est, truth, classes, &mask).overall, 0.0);
    EXPECT_DOUBLE_EQ(matrix_error(est, truth, classes).overall, 0.25);
    classes(0, 1) = 3;
    EXPECT_THROW(matrix_error(est, truth, classes), Error);
}

TEST(CrossVal, SeparableIsPerfect) {
    const LabeledSet set = blobs(100, 20.0, 1);
    CrossValConfig cfg;
    cfg.seed = 3;
    const auto rep = crossval_classify(set, cfg);
    ASSERT_EQ(rep.folds.size(), 4u);
    for (const auto& f : rep.folds)
        EXPECT_EQ(f.accuracy, 1.0);
    EXPECT_EQ(rep.mean, 1.0);
    cfg.classifier.kind = ClassifierKind::KNearestNeighbors;
    EXPECT_EQ(crossval_classify(set, cfg).mean, 1.0);
}

TEST(CrossVal, ShuffledLabelsNearChance) {
    LabeledSet set = blobs(500, 3.0, 2);
    std::mt19937_64 rng(5);
    std::shuffle(set.labels.begin(), set.labels.end(), rng);
    CrossValConfig cfg;
    cfg.seed = 8;
    EXPECT_NEAR(crossval_classify(set, cfg).mean, 0.5, 0.1);
}

TEST(CrossVal, GroupedFoldsKeepGroupsTogether) {
    const LabeledSet set = blobs(120, 1.0, 4, 10);
    const auto folds = assign_folds(set, 4, true, 6);
    std::map<int, int> fold_of_group;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto [it, fresh] = fold_of_group.emplace(set.groups[i], folds[i]);
        EXPECT_EQ(it->second, folds[i]) << "group " << set.groups[i] << " spans folds";
    }
    for (int f = 0; f < 4; ++f) {
        std::set<int> train, test;
        for (std::size_t i = 0; i < set.size(); ++i)
            (folds[i] == f ? test : train).insert(set.groups[i]);
        for (int g : test)
            EXPECT_EQ(train.count(g), 0u);
    }
}

TEST(CrossVal, FoldsAreSeededAndBalanced) {
    const LabeledSet set = blobs(50, 1.0, 7);
    const auto a = assign_folds(set, 4, false, 1);
    EXPECT_EQ(a, assign_folds(set, 4, false, 1));
    EXPECT_NE(a, assign_folds(set, 4, false, 2));
    std::vector<int> sizes(4, 0);
    for (int f : a)
        ++sizes[f];
    for (int s : sizes)
        EXPECT_TRUE(s == 25);
}

TEST(CrossVal, MissingClassSkipsFold) {
    // Class 1 lives in a single group, so the fold holding it has no class-1
    // training samples.
    LabeledSet set = blobs(40, 5.0, 9);
    set.groups.assign(set.size(), 0);
    for (std::size_t i = 0; i < set.size(); ++i)
        set.groups[i] = set.labels[i] == 1 ? 100 : static_cast<int>(i % 6);
    CrossValConfig cfg;
    cfg.grouped = true;
    const auto rep = crossval_classify(set, cfg);
    int skipped = 0;
    for (const auto& f : rep.folds)
        if (f.skipped) {
            ++skipped;
            EXPECT_FALSE(f.message.empty());
        }
    EXPECT_EQ(skipped, 1);
}

TEST(CrossVal, GroupedNeedsGroups) {
    const LabeledSet set = blobs(20, 1.0, 1);
    CrossValConfig cfg;
    cfg.grouped = true;
    EXPECT_THROW(crossval_classify(set, cfg), Error);
}

TEST(LabeledSetBuilder, IgnoresLabelAndCarriesGroups) {
    GuideImageD feats(2, 2, 2);
    for (int i = 0; i < 8; ++i)
        feats.values().data()[i] = i;
    LabelImage labels(2, 2, 0);
    labels(0, 1) = 9;
    labels(1, 1) = 1;
    LabelImage groups(2, 2, 0);
    groups(1, 0) = 5;
    const auto set = make_labeled_set(feats, labels, &groups, std::uint16_t{9});
    ASSERT_EQ(set.size(), 3u);
    EXPECT_EQ(set.labels, (std::vector<int>{0, 0, 1}));
    EXPECT_EQ(set.groups, (std::vector<int>{0, 5, 0}));
    EXPECT_EQ(set.x(1, 0), 4.0);
    EXPECT_EQ(set.x(1, 1), 5.0);
}

TEST(Reports, CsvAndJson) {
    const LabeledSet set = blobs(40, 20.0, 3);
    const auto rep = crossval_classify(set, CrossValConfig{});
    std::ostringstream csv;
    write_fold_csv(csv, rep);
    const std::string text = csv.str();
    EXPECT_EQ(text.substr(0, 14), "fold,accuracy\n");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);

    const auto j = nlohmann::json::parse(report_json({{"pgnlm", rep}, {"boxcar", rep}}));
    ASSERT_TRUE(j.contains("pgnlm"));
    EXPECT_EQ(j["pgnlm"]["mean"].get<double>(), rep.mean);
    EXPECT_EQ(j["boxcar"]["folds"].size(), 4u);
    EXPECT_EQ(j["pgnlm"]["folds"][0]["confusion"].size(), 2u);
}
