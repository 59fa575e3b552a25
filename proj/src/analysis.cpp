#include "pgnlm/analysis.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "pgnlm/error.hpp"

namespace pgnlm::analysis {

FeatureVector features_of(const HermitianMatrix3D& c) {
    FeatureVector f;
    f.c11 = c(0, 0).real();
    f.c22 = c(1, 1).real();
    f.c33 = c(2, 2).real();
    f.abs_c13 = std::abs(c(0, 2));
    if (f.abs_c13 > 0.0) {
        f.arg_c13 = std::arg(c(0, 2));
        if (f.arg_c13 <= -std::numbers::pi)
            f.arg_c13 = std::numbers::pi;
    }
    return f;
}

GuideImageD extract_features(const CovarianceFieldD& field) {
    GuideImageD out(field.height(), field.width(), kFeatureCount);
    for (int r = 0; r < field.height(); ++r)
        for (int c = 0; c < field.width(); ++c)
            out.pixel(r, c) = features_of(field(r, c)).as_vector().transpose();
    return out;
}

std::vector<double> c11_values(const CovarianceFieldD& field, const Region& region) {
    if (region.w < 1 || region.h < 1 || region.x < 0 || region.y < 0 || region.x + region.w > field.width() ||
        region.y + region.h > field.height())
        throw Error(ErrorCategory::Geometry, "region lies outside the raster");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(region.w) * static_cast<std::size_t>(region.h));
    for (int r = region.y; r < region.y + region.h; ++r)
        for (int c = region.x; c < region.x + region.w; ++c)
            out.push_back(field(r, c)(0, 0).real());
    return out;
}

double enl(std::span<const double> intensities) {
    if (intensities.size() < 2)
        throw Error(ErrorCategory::Data, "ENL needs at least two samples");
    const double n = static_cast<double>(intensities.size());
    const double mean = std::accumulate(intensities.begin(), intensities.end(), 0.0) / n;
    if (!(mean > 0.0))
        throw Error(ErrorCategory::Data, "ENL needs a positive mean intensity");
    double var = 0.0;
    for (double v : intensities)
        var += (v - mean) * (v - mean);
    var /= n;
    if (var == 0.0)
        return std::numeric_limits<double>::infinity();
    return mean * mean / var;
}

MatrixErrorSummary matrix_error(const CovarianceFieldD& estimate, std::span<const HermitianMatrix3D> truth,
                                const LabelImage& class_map, const LabelImage* mask) {
    if (class_map.height() != estimate.height() || class_map.width() != estimate.width())
        throw Error(ErrorCategory::Geometry, "class map and estimate dimensions differ");
    if (mask && (mask->height() != estimate.height() || mask->width() != estimate.width()))
        throw Error(ErrorCategory::Geometry, "mask and estimate dimensions differ");

    MatrixErrorSummary out;
    out.per_class.assign(truth.size(), 0.0);
    out.counts.assign(truth.size(), 0);
    double total = 0.0;
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        if (mask && mask->data()[i] == 0)
            continue;
        const auto k = class_map.data()[i];
        if (k >= truth.size())
            throw Error(ErrorCategory::Data, "class map references unknown class " + std::to_string(k));
        const HermitianMatrix3D& sigma = truth[k];
        const double err = (estimate.data()[i] - sigma).norm() / sigma.norm();
        out.per_class[k] += err;
        ++out.counts[k];
        total += err;
        ++out.pixels;
    }
    for (std::size_t k = 0; k < truth.size(); ++k)
        out.per_class[k] = out.counts[k] ? out.per_class[k] / static_cast<double>(out.counts[k])
                                         : std::numeric_limits<double>::quiet_NaN();
    out.overall = out.pixels ? total / static_cast<double>(out.pixels) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

LabeledSet make_labeled_set(const GuideImageD& features, const LabelImage& labels, const LabelImage* groups,
                            std::optional<std::uint16_t> ignore_label) {
    if (labels.height() != features.height() || labels.width() != features.width())
        throw Error(ErrorCategory::Geometry, "label and feature rasters differ in size");
    if (groups && (groups->height() != features.height() || groups->width() != features.width()))
        throw Error(ErrorCategory::Geometry, "group and feature rasters differ in size");

    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (!ignore_label || labels.data()[i] != *ignore_label)
            rows.push_back(static_cast<Eigen::Index>(i));

    LabeledSet set;
    set.x.resize(static_cast<Eigen::Index>(rows.size()), features.bands());
    set.labels.reserve(rows.size());
    if (groups)
        set.groups.reserve(rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
        const auto i = rows[j];
        set.x.row(static_cast<Eigen::Index>(j)) = features.values().row(i);
        set.labels.push_back(labels.data()[static_cast<std::size_t>(i)]);
        if (groups)
            set.groups.push_back(groups->data()[static_cast<std::size_t>(i)]);
    }
    return set;
}

std::vector<int> assign_folds(const LabeledSet& data, int k, bool grouped, std::uint64_t seed) {
    if (k < 2)
        throw Error(ErrorCategory::Usage, "cross-validation needs k >= 2");
    const std::size_t n = data.size();
    std::vector<int> fold(n, 0);
    std::mt19937_64 rng(seed);

    if (!grouped) {
        if (n < static_cast<std::size_t>(k))
            throw Error(ErrorCategory::Data, "fewer samples than folds");
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < n; ++i)
            fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
        return fold;
    }

    if (data.groups.size() != n)
        throw Error(ErrorCategory::Data, "grouped cross-validation needs a group id per sample");
    std::map<int, std::size_t> sizes;
    for (int g : data.groups)
        ++sizes[g];
    if (sizes.size() < static_cast<std::size_t>(k))
        throw Error(ErrorCategory::Data, "fewer groups than folds");

    std::vector<std::pair<int, std::size_t>> order(sizes.begin(), sizes.end());
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::size_t> load(static_cast<std::size_t>(k), 0);
    std::map<int, int> group_fold;
    for (const auto& [g, size] : order) {
        const auto f = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
        group_fold[g] = static_cast<int>(f);
        load[f] += size;
    }
    for (std::size_t i = 0; i < n; ++i)
        fold[i] = group_fold[data.groups[i]];
    return fold;
}

namespace {

struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    static Standardizer fit(const Eigen::MatrixXd& x) {
        Standardizer s;
        s.mean = x.colwise().mean();
        const Eigen::MatrixXd centred = x.rowwise() - s.mean;
        s.scale = (centred.array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt();
        for (Eigen::Index j = 0; j < s.scale.size(); ++j)
            if (!(s.scale(j) > 0.0))
                s.scale(j) = 1.0;
        return s;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        return (x.rowwise() - mean).array().rowwise() / scale.array();
    }
};

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

/// Returns positions into `classes`.
std::vector<int> predict(const Eigen::MatrixXd& train, const std::vector<int>& train_cls, const Eigen::MatrixXd& test,
                         std::size_t n_classes, const ClassifierConfig& cfg) {
    std::vector<int> out(static_cast<std::size_t>(test.rows()), 0);
    if (cfg.kind == ClassifierKind::NearestCentroid) {
        Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_classes), train.cols());
        std::vector<double> counts(n_classes, 0.0);
        for (Eigen::Index i = 0; i < train.rows(); ++i) {
            const auto c = static_cast<std::size_t>(train_cls[static_cast<std::size_t>(i)]);
            centroids.row(static_cast<Eigen::Index>(c)) += train.row(i);
            counts[c] += 1.0;
        }
        for (std::size_t c = 0; c < n_classes; ++c)
            if (counts[c] > 0.0)
                centroids.row(static_cast<Eigen::Index>(c)) /= counts[c];
        for (Eigen::Index i = 0; i < test.rows(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < n_classes; ++c) {
                if (counts[c] == 0.0)
                    continue;
                const double d = (test.row(i) - centroids.row(static_cast<Eigen::Index>(c))).squaredNorm();
                if (d < best) {
                    best = d;
                    out[static_cast<std::size_t>(i)] = static_cast<int>(c);
                }
            }
        }
        return out;
    }

    const auto kn = static_cast<std::size_t>(std::max(1, cfg.neighbors));
    std::vector<std::pair<double, std::size_t>> dist(static_cast<std::size_t>(train.rows()));
    for (Eigen::Index i = 0; i < test.rows(); ++i) {
        for (Eigen::Index j = 0; j < train.rows(); ++j)
            dist[static_cast<std::size_t>(j)] = {(test.row(i) - train.row(j)).squaredNorm(), static_cast<std::size_t>(j)};
        const std::size_t m = std::min(kn, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m), dist.end());
        std::vector<int> votes(n_classes, 0);
        for (std::size_t v = 0; v < m; ++v)
            ++votes[static_cast<std::size_t>(train_cls[dist[v].second])];
        out[static_cast<std::size_t>(i)] =
            static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    return out;
}

} // namespace

CrossValReport crossval_classify(const LabeledSet& data, const CrossValConfig& cfg) {
    if (static_cast<std::size_t>(data.x.rows()) != data.size())
        throw Error(ErrorCategory::Data, "feature rows and labels are not aligned");
    const std::set<int> distinct(data.labels.begin(), data.labels.end());
    if (distinct.size() < 2)
        throw Error(ErrorCategory::Data, "classification needs at least two classes");

    CrossValReport report;
    report.classes.assign(distinct.begin(), distinct.end());
    std::map<int, int> class_pos;
    for (std::size_t i = 0; i < report.classes.size(); ++i)
        class_pos[report.classes[i]] = static_cast<int>(i);
    const std::size_t nc = report.classes.size();

    const std::vector<int> fold = assign_folds(data, cfg.k, cfg.grouped, cfg.seed);
    std::vector<double> accs;
    for (int f = 0; f < cfg.k; ++f) {
        FoldResult res;
        res.fold = f;
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < data.size(); ++i)
            (fold[i] == f ? test_idx : train_idx).push_back(i);
        res.n_train = train_idx.size();
        res.n_test = test_idx.size();
        res.confusion.assign(nc, std::vector<std::size_t>(nc, 0));

        std::set<int> train_classes;
        for (auto i : train_idx)
            train_classes.insert(data.labels[i]);
        std::string missing;
        for (auto i : test_idx)
            if (!train_classes.count(data.labels[i])) {
                missing = std::to_string(data.labels[i]);
                break;
            }
        if (test_idx.empty() || !missing.empty()) {
            res.skipped = true;
            res.message = test_idx.empty() ? "empty test fold"
                                           : "class " + missing + " absent from training fold";
            report.folds.push_back(std::move(res));
            continue;
        }

        const Eigen::MatrixXd train_raw = take_rows(data.x, train_idx);
        const Standardizer z = Standardizer::fit(train_raw);
        const Eigen::MatrixXd train = z.apply(train_raw);
        const Eigen::MatrixXd test = z.apply(take_rows(data.x, test_idx));
        std::vector<int> train_cls;
        train_cls.reserve(train_idx.size());
        for (auto i : train_idx)
            train_cls.push_back(class_pos[data.labels[i]]);

        const std::vector<int> pred = predict(train, train_cls, test, nc, cfg.classifier);
        std::size_t correct = 0;
        for (std::size_t j = 0; j < test_idx.size(); ++j) {
            const auto truth = static_cast<std::size_t>(class_pos[data.labels[test_idx[j]]]);
            const auto p = static_cast<std::size_t>(pred[j]);
            ++res.confusion[truth][p];
            correct += truth == p;
        }
        res.accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());
        accs.push_back(res.accuracy);
        report.folds.push_back(std::move(res));
    }
    if (accs.empty())
        throw Error(ErrorCategory::Data, "every cross-validation fold was skipped");
    report.mean = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
    report.min = *std::min_element(accs.begin(), accs.end());
    report.max = *std::max_element(accs.begin(), accs.end());
    return report;
}

void write_fold_csv(std::ostream& os, const CrossValReport& report) {
    os << "fold,accuracy\n";
    for (const auto& f : report.folds)
        if (!f.skipped)
            os << f.fold << ',' << f.accuracy << '\n';
}

std::string report_json(const std::map<std::string, CrossValReport>& reports) {
    nlohmann::json root = nlohmann::json::object();
    for (const auto& [method, rep] : reports) {
        nlohmann::json folds = nlohmann::json::array();
        for (const auto& f : rep.folds) {
            nlohmann::json jf{{"fold", f.fold}, {"n_train", f.n_train}, {"n_test", f.n_test},
                              {"skipped", f.skipped}, {"confusion", f.confusion}};
            if (f.skipped)
                jf["message"] = f.message;
            else
                jf["accuracy"] = f.accuracy;
            folds.push_back(std::move(jf));
        }
        root[method] = {{"mean", rep.mean}, {"min", rep.min}, {"max", rep.max},
                        {"classes", rep.classes}, {"folds", std::move(folds)}};
    }
    return root.dump(2);
}

} // namespace pgnlm::analysis
