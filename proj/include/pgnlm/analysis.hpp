#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgnlm/types.hpp"

namespace pgnlm::analysis {

/// The five polarimetric statistics used for classification. C12 and C23
/// are not retained.
struct FeatureVector {
    double c11 = 0.0;
    double c22 = 0.0;
    double c33 = 0.0;
    double abs_c13 = 0.0;
    double arg_c13 = 0.0; ///< in (-pi, pi]; 0 when |c13| = 0

    Eigen::Matrix<double, 5, 1> as_vector() const {
        Eigen::Matrix<double, 5, 1> v;
        v << c11, c22, c33, abs_c13, arg_c13;
        return v;
    }
};

inline constexpr int kFeatureCount = 5;

FeatureVector features_of(const HermitianMatrix3D& c);

/// Features for every pixel, packed as a 5-band raster in FeatureVector
/// field order.
GuideImageD extract_features(const CovarianceFieldD& field);

/// Axis-aligned pixel region: columns [x, x+w), rows [y, y+h).
struct Region {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

/// Real part of C11 inside `region`.
std::vector<double> c11_values(const CovarianceFieldD& field, const Region& region);

/// Equivalent number of looks, mean^2 / population variance. Returns +inf
/// for a constant region. Throws Error(Data) for fewer than two samples or a
/// non-positive mean.
double enl(std::span<const double> intensities);

inline bool enl_is_infinite(double v) { return v == std::numeric_limits<double>::infinity(); }

struct MatrixErrorSummary {
    /// Mean relative Frobenius error per class; NaN for classes with no pixels.
    std::vector<double> per_class;
    std::vector<std::size_t> counts;
    /// Mean over all evaluated pixels.
    double overall = 0.0;
    std::size_t pixels = 0;
};

/// Mean of |C(t) - Sigma_class(t)|_F / |Sigma_class(t)|_F, per class and over
/// all pixels. When `mask` is given only pixels with a nonzero mask value are
/// evaluated.
MatrixErrorSummary matrix_error(const CovarianceFieldD& estimate, std::span<const HermitianMatrix3D> truth,
                                const LabelImage& class_map, const LabelImage* mask = nullptr);

/// Samples for classification: one row of `x` per sample.
struct LabeledSet {
    Eigen::MatrixXd x;
    std::vector<int> labels;
    std::vector<int> groups; ///< empty when no grouping is available

    std::size_t size() const { return labels.size(); }
};

/// Builds a LabeledSet from a feature raster and label raster. Pixels whose
/// label equals `ignore_label` are skipped.
LabeledSet make_labeled_set(const GuideImageD& features, const LabelImage& labels,
                            const LabelImage* groups = nullptr,
                            std::optional<std::uint16_t> ignore_label = std::nullopt);

enum class ClassifierKind { NearestCentroid, KNearestNeighbors };

struct ClassifierConfig {
    ClassifierKind kind = ClassifierKind::NearestCentroid;
    int neighbors = 5;
};

struct CrossValConfig {
    int k = 4;
    bool grouped = false;
    std::uint64_t seed = 0;
    ClassifierConfig classifier;
};

struct FoldResult {
    int fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double accuracy = 0.0;
    bool skipped = false;
    std::string message;
    /// confusion[true][predicted], indexed by position in CrossValReport::classes.
    std::vector<std::vector<std::size_t>> confusion;
};

struct CrossValReport {
    std::vector<int> classes;
    std::vector<FoldResult> folds;
    /// Over folds that were not skipped.
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Fold index (0..k-1) for every sample.
///
/// Ungrouped: a seeded shuffle dealt round-robin. Grouped: groups are
/// shuffled with the seed, ordered by decreasing size (stable), then each is
/// assigned to the currently smallest fold, so a group never spans folds.
std::vector<int> assign_folds(const LabeledSet& data, int k, bool grouped, std::uint64_t seed);

/// k-fold cross-validation. Features are z-scored with statistics from the
/// training fold only. A fold whose test set contains a class absent from its
/// training set is skipped and reported.
CrossValReport crossval_classify(const LabeledSet& data, const CrossValConfig& cfg);

/// "fold,accuracy" CSV, one line per evaluated fold.
void write_fold_csv(std::ostream& os, const CrossValReport& report);

/// JSON summary keyed by method name: mean/min/max, per-fold accuracies and
/// confusion matrices.
std::string report_json(const std::map<std::string, CrossValReport>& reports);

} // namespace pgnlm::analysis
