#include "pgnlm/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "pgnlm/analysis.hpp"
#include "pgnlm/calibration.hpp"
#include "pgnlm/container.hpp"
#include "pgnlm/estimator.hpp"
#include "pgnlm/simulator.hpp"

namespace pgnlm::cli {
namespace {

int exit_code(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::Usage: return kUsage;
    case ErrorCategory::Io: return kIo;
    case ErrorCategory::Format: return kFormat;
    case ErrorCategory::Geometry: return kGeometry;
    case ErrorCategory::Calibration: return kCalibration;
    case ErrorCategory::Data: return kData;
    }
    return kData;
}

/// --threads when given, else PGNLM_THREADS, else all cores.
unsigned thread_count(int flag) {
    if (flag > 0)
        return static_cast<unsigned>(flag);
    if (const char* env = std::getenv("PGNLM_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0)
                return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        throw Error(ErrorCategory::Usage, std::string("PGNLM_THREADS must be a positive integer, got '") + env + "'");
    }
    return 0;
}

void require_same_size(int h1, int w1, int h2, int w2, const std::string& what) {
    if (h1 != h2 || w1 != w2)
        throw Error(ErrorCategory::Geometry, what + ": " + std::to_string(h1) + "x" + std::to_string(w1) + " vs " +
                                                 std::to_string(h2) + "x" + std::to_string(w2));
}

analysis::Region parse_region(const std::string& text) {
    analysis::Region r;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream ss(text);
    if (!(ss >> r.x >> c1 >> r.y >> c2 >> r.w >> c3 >> r.h) || c1 != ',' || c2 != ',' || c3 != ',' || !ss.eof())
        throw Error(ErrorCategory::Usage, "region must be x,y,w,h, got '" + text + "'");
    return r;
}

GuideImageD scalar_raster(const Raster<double>& r) {
    GuideImageD g(r.height(), r.width(), 1);
    for (std::size_t i = 0; i < r.size(); ++i)
        g.values()(static_cast<Eigen::Index>(i), 0) = r.data()[i];
    return g;
}

std::string config_echo(const PgnlmConfig& cfg) {
    std::ostringstream os;
    os << "config: search=" << cfg.search_side() << "x" << cfg.search_side()
       << " patch=" << cfg.patch().side() << "x" << cfg.patch().side() << " gamma=" << cfg.gamma
       << " lambda=" << cfg.lambda << " p_pol=" << cfg.p_pol << " p_opt=" << cfg.p_opt << " s_max=" << cfg.s_max
       << " guided=" << (cfg.guided ? "yes" : "no");
    return os.str();
}

struct SimulateArgs {
    std::string scene;
    int size = 64;
    std::uint64_t seed = 0;
    std::string out_slc, out_guide, out_labels, out_groups, meta;
    int threads = 0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const sim::SceneSpec spec = sim::builtin_scene(a.scene, a.size, a.seed);
    const sim::Scene scene = sim::generate_scene(spec, thread_count(a.threads));
    io::write_container(scene.slc, a.out_slc);
    if (!a.out_guide.empty())
        io::write_container(scene.guide, a.out_guide);
    if (!a.out_labels.empty())
        io::write_container(scene.class_map, a.out_labels);
    if (!a.out_groups.empty()) {
        if (!scene.group_map)
            throw Error(ErrorCategory::Usage, "scene '" + a.scene + "' has no group map");
        io::write_container(*scene.group_map, a.out_groups);
    }
    const std::string meta = a.meta.empty() ? a.out_slc + ".meta" : a.meta;
    sim::save_metadata(meta, spec);
    out << "simulated " << a.scene << " " << a.size << "x" << a.size << " seed=" << a.seed << "\n";
    return kOk;
}

struct CalibrateArgs {
    std::string slc, guide, out;
    double p_pol = 50.0, p_opt = 50.0;
    int search = 19, patch = 2;
    std::string sampling = "diagonal";
    std::uint64_t seed = 0;
    int threads = 0;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
    PgnlmConfig cfg;
    cfg.search_half = a.search;
    cfg.patch_half = a.patch;
    cfg.p_pol = a.p_pol;
    cfg.p_opt = a.p_opt;
    CalibrationSampling sampling;
    if (a.sampling == "random") {
        sampling.mode = CalibrationSampling::Mode::Random;
        sampling.seed = a.seed;
    } else if (a.sampling != "diagonal") {
        throw Error(ErrorCategory::Usage, "sampling must be 'diagonal' or 'random'");
    }
    const ScatteringImageD slc = io::read_slc(a.slc);
    CalibrationResult calib;
    if (a.guide.empty()) {
        calib = calibrate(slc, cfg, sampling, thread_count(a.threads));
    } else {
        const GuideImageD guide = io::read_guide(a.guide);
        require_same_size(slc.height(), slc.width(), guide.height(), guide.width(), "SLC and guide sizes differ");
        calib = calibrate(slc, guide, cfg, sampling, thread_count(a.threads));
    }
    save_calibration(a.out, calib);
    out << std::setprecision(17) << "t_pol=" << calib.t_pol << " t_opt=" << calib.t_opt
        << " n_samples=" << calib.n_samples << "\n";
    return kOk;
}

struct EstimateArgs {
    std::string slc, guide, calib, out, diagnostics;
    double gamma = 0.85, lambda = 2.0;
    std::optional<double> p_pol, p_opt;
    std::optional<int> search, patch;
    int smax = 64;
    bool unguided = false;
    int threads = 0;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
    if (a.calib.empty())
        throw Error(ErrorCategory::Calibration, "missing calibration: pass --calib FILE (see the calibrate command)");
    CalibrationResult calib = load_calibration(a.calib);

    PgnlmConfig cfg;
    cfg.search_half = calib.search_half;
    cfg.patch_half = calib.patch_half;
    if ((a.search && *a.search != calib.search_half) || (a.patch && *a.patch != calib.patch_half))
        throw Error(ErrorCategory::Geometry,
                    "incompatible geometry: calibration used search " + std::to_string(calib.search_half) +
                        " / patch " + std::to_string(calib.patch_half) + "; recalibrate with matching --search/--patch");
    cfg.gamma = a.gamma;
    cfg.lambda = a.lambda;
    cfg.s_max = a.smax;
    cfg.guided = !a.unguided;
    cfg.p_pol = a.p_pol.value_or(calib.p_pol);
    cfg.p_opt = a.p_opt.value_or(calib.p_opt);
    cfg.validate();

    const ScatteringImageD slc = io::read_slc(a.slc);
    std::optional<GuideImageD> guide;
    if (cfg.guided) {
        if (a.guide.empty())
            throw Error(ErrorCategory::Usage, "guided estimation needs --guide (or pass --unguided)");
        guide = io::read_guide(a.guide);
        require_same_size(slc.height(), slc.width(), guide->height(), guide->width(), "SLC and guide sizes differ");
    }

    const unsigned threads = thread_count(a.threads);
    if (cfg.p_pol != calib.p_pol || cfg.p_opt != calib.p_opt) {
        err << "note: percentiles differ from calibration file; recalibrating\n";
        calib = guide ? calibrate(slc, *guide, cfg, {}, threads) : calibrate(slc, cfg, {}, threads);
    }

    out << config_echo(cfg) << "\n";
    const EstimateResult<double> res = estimate_image(slc, guide ? &*guide : nullptr, cfg, calib, threads);
    io::write_container(res.field, a.out);
    if (!a.diagnostics.empty()) {
        Raster<double> count(slc.height(), slc.width());
        for (std::size_t i = 0; i < count.size(); ++i)
            count.data()[i] = res.diagnostics.predictors_used.data()[i];
        io::write_container(scalar_raster(count), a.diagnostics + ".predictors.bin");
        io::write_container(scalar_raster(res.diagnostics.weight_sum), a.diagnostics + ".weights.bin");
    }
    return kOk;
}

int cmd_boxcar(const std::string& slc_path, int half, const std::string& out_path, int threads) {
    const ScatteringImageD slc = io::read_slc(slc_path);
    io::write_container(boxcar(slc, half, BorderPolicy::Mirror, thread_count(threads)), out_path);
    return kOk;
}

int cmd_features(const std::string& cov, const std::string& out_path) {
    io::write_container(analysis::extract_features(io::read_covariance(cov)), out_path);
    return kOk;
}

struct MetricsArgs {
    std::string cov, truth, labels, region, out;
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
    const CovarianceFieldD field = io::read_covariance(a.cov);
    nlohmann::json j = nlohmann::json::object();
    j["height"] = field.height();
    j["width"] = field.width();
    if (!a.region.empty()) {
        const double v = analysis::enl(analysis::c11_values(field, parse_region(a.region)));
        if (analysis::enl_is_infinite(v))
            j["enl_c11"] = "inf";
        else
            j["enl_c11"] = v;
    }
    if (!a.truth.empty() || !a.labels.empty()) {
        if (a.truth.empty() || a.labels.empty())
            throw Error(ErrorCategory::Usage, "--truth and --labels must be given together");
        const sim::SceneTruth truth = sim::load_metadata(a.truth);
        const LabelImage labels = io::read_labels(a.labels);
        require_same_size(field.height(), field.width(), labels.height(), labels.width(),
                          "covariance and label sizes differ");
        const auto err = analysis::matrix_error(field, truth.sigma, labels);
        nlohmann::json per = nlohmann::json::array();
        for (std::size_t k = 0; k < err.per_class.size(); ++k) {
            if (err.counts[k])
                per.push_back({{"class", k}, {"pixels", err.counts[k]}, {"error", err.per_class[k]}});
            else
                per.push_back({{"class", k}, {"pixels", 0}, {"error", nullptr}});
        }
        j["matrix_error"] = {{"overall", err.overall}, {"per_class", per}};
    }
    const std::string text = j.dump(2);
    if (a.out.empty()) {
        out << text << "\n";
    } else {
        std::ofstream os(a.out);
        if (!(os << text << "\n"))
            throw Error(ErrorCategory::Io, "failed writing '" + a.out + "'");
    }
    return kOk;
}

struct ClassifyArgs {
    std::vector<std::string> features, methods;
    std::string labels, groups, out, csv;
    int k = 4;
    std::uint64_t seed = 0;
    int knn = 0;
    int ignore_label = -1;
};

int cmd_classify(const ClassifyArgs& a, std::ostream& out) {
    if (!a.methods.empty() && a.methods.size() != a.features.size())
        throw Error(ErrorCategory::Usage, "--method must be given once per --features");
    const LabelImage labels = io::read_labels(a.labels);
    std::optional<LabelImage> groups;
    if (!a.groups.empty())
        groups = io::read_labels(a.groups);

    analysis::CrossValConfig cv;
    cv.k = a.k;
    cv.grouped = groups.has_value();
    cv.seed = a.seed;
    if (a.knn > 0) {
        cv.classifier.kind = analysis::ClassifierKind::KNearestNeighbors;
        cv.classifier.neighbors = a.knn;
    }
    std::optional<std::uint16_t> ignore;
    if (a.ignore_label >= 0)
        ignore = static_cast<std::uint16_t>(a.ignore_label);

    std::map<std::string, analysis::CrossValReport> reports;
    for (std::size_t i = 0; i < a.features.size(); ++i) {
        const GuideImageD feats = io::read_guide(a.features[i]);
        const auto set = analysis::make_labeled_set(feats, labels, groups ? &*groups : nullptr, ignore);
        auto rep = analysis::crossval_classify(set, cv);
        const std::string name = a.methods.empty() ? a.features[i] : a.methods[i];
        if (!a.csv.empty()) {
            std::ofstream os(a.csv + "." + std::to_string(i) + ".csv");
            analysis::write_fold_csv(os, rep);
            if (!os)
                throw Error(ErrorCategory::Io, "failed writing fold CSV");
        }
        out << name << ": mean=" << rep.mean << " min=" << rep.min << " max=" << rep.max << "\n";
        for (const auto& f : rep.folds)
            if (f.skipped)
                out << "warning: " << name << " fold " << f.fold << " skipped: " << f.message << "\n";
        reports.emplace(name, std::move(rep));
    }
    std::ofstream os(a.out);
    if (!(os << analysis::report_json(reports) << "\n"))
        throw Error(ErrorCategory::Io, "failed writing '" + a.out + "'");
    return kOk;
}

int cmd_compare(const std::string& pa, const std::string& pb, double tol, std::ostream& out) {
    const CovarianceFieldD a = io::read_covariance(pa);
    const CovarianceFieldD b = io::read_covariance(pb);
    require_same_size(a.height(), a.width(), b.height(), b.width(), "covariance sizes differ");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double ref = std::max(a.data()[i].norm(), b.data()[i].norm());
        const double diff = (a.data()[i] - b.data()[i]).norm();
        worst = std::max(worst, ref > 0.0 ? diff / ref : diff);
    }
    out << std::setprecision(6) << "max_relative_frobenius=" << worst << "\n";
    return worst <= tol ? kOk : kMismatch;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Guided nonlocal PolSAR covariance estimation"};
    app.name(args.empty() ? "pgnlm" : args.front());
    app.require_subcommand(1);

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic SLC scene with guide and labels");
    simulate->add_option("--scene", sim_args.scene, "Scene name")
        ->required()
        ->check(CLI::IsMember(sim::builtin_scene_names()));
    simulate->add_option("--size", sim_args.size, "Scene side length in pixels")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim_args.seed, "Random seed");
    simulate->add_option("--out-slc", sim_args.out_slc, "SLC container")->required();
    simulate->add_option("--out-guide", sim_args.out_guide, "Guide container");
    simulate->add_option("--out-labels", sim_args.out_labels, "Class label container");
    simulate->add_option("--out-groups", sim_args.out_groups, "Group label container");
    simulate->add_option("--meta", sim_args.meta, "Metadata sidecar (default <out-slc>.meta)");
    simulate->add_option("--threads", sim_args.threads, "Worker threads");

    CalibrateArgs cal_args;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Compute percentile thresholds along the diagonal");
    calibrate_cmd->add_option("--slc", cal_args.slc)->required();
    calibrate_cmd->add_option("--guide", cal_args.guide, "Optical guide (omit for PolSAR-only calibration)");
    calibrate_cmd->add_option("--p-pol", cal_args.p_pol, "PolSAR percentile")->check(CLI::Range(0.0, 100.0));
    calibrate_cmd->add_option("--p-opt", cal_args.p_opt, "Optical percentile")->check(CLI::Range(0.0, 100.0));
    calibrate_cmd->add_option("--search", cal_args.search, "Search window half-width")->check(CLI::NonNegativeNumber);
    calibrate_cmd->add_option("--patch", cal_args.patch, "Patch half-width")->check(CLI::NonNegativeNumber);
    calibrate_cmd->add_option("--sampling", cal_args.sampling, "diagonal or random");
    calibrate_cmd->add_option("--seed", cal_args.seed, "Seed for random sampling");
    calibrate_cmd->add_option("--out", cal_args.out)->required();
    calibrate_cmd->add_option("--threads", cal_args.threads, "Worker threads");

    EstimateArgs est_args;
    auto* estimate = app.add_subcommand("estimate", "PGNLM covariance estimation");
    estimate->add_option("--slc", est_args.slc)->required();
    estimate->add_option("--guide", est_args.guide);
    estimate->add_option("--calib", est_args.calib, "Calibration file from `calibrate`");
    estimate->add_option("--gamma", est_args.gamma)->check(CLI::Range(0.0, 1.0));
    estimate->add_option("--lambda", est_args.lambda)->check(CLI::NonNegativeNumber);
    estimate->add_option("--smax", est_args.smax, "Maximum number of predictors");
    estimate->add_option("--p-pol", est_args.p_pol, "Override the PolSAR percentile (recalibrates)")
        ->check(CLI::Range(0.0, 100.0));
    estimate->add_option("--p-opt", est_args.p_opt, "Override the optical percentile (recalibrates)")
        ->check(CLI::Range(0.0, 100.0));
    estimate->add_option("--search", est_args.search, "Must match the calibration");
    estimate->add_option("--patch", est_args.patch, "Must match the calibration");
    estimate->add_flag("--unguided", est_args.unguided, "Ignore the guide; rank predictors by PolSAR dissimilarity");
    estimate->add_option("--diagnostics", est_args.diagnostics, "Prefix for predictor-count and weight-sum rasters");
    estimate->add_option("--out", est_args.out)->required();
    estimate->add_option("--threads", est_args.threads, "Worker threads (default PGNLM_THREADS or all cores)");

    std::string box_slc, box_out;
    int box_half = 2, box_threads = 0;
    auto* box = app.add_subcommand("boxcar", "Boxcar covariance estimate");
    box->add_option("--slc", box_slc)->required();
    box->add_option("--half", box_half)->check(CLI::NonNegativeNumber);
    box->add_option("--out", box_out)->required();
    box->add_option("--threads", box_threads);

    std::string feat_cov, feat_out;
    auto* features = app.add_subcommand("features", "Extract C11, C22, C33, |C13|, arg C13");
    features->add_option("--cov", feat_cov)->required();
    features->add_option("--out", feat_out)->required();

    MetricsArgs met_args;
    auto* metrics = app.add_subcommand("metrics", "ENL and ground-truth matrix error");
    metrics->add_option("--cov", met_args.cov)->required();
    metrics->add_option("--truth", met_args.truth, "Scene metadata sidecar");
    metrics->add_option("--labels", met_args.labels, "Class label container");
    metrics->add_option("--enl-region", met_args.region, "x,y,w,h");
    metrics->add_option("--out", met_args.out, "JSON output (default stdout)");

    ClassifyArgs cls_args;
    auto* classify = app.add_subcommand("classify", "Cross-validated classification of feature rasters");
    classify->add_option("--features", cls_args.features, "Feature container (repeatable)")->required();
    classify->add_option("--method", cls_args.methods, "Name for each --features");
    classify->add_option("--labels", cls_args.labels)->required();
    classify->add_option("--groups", cls_args.groups, "Group container; enables grouped k-fold");
    classify->add_option("--k", cls_args.k)->check(CLI::Range(2, 1000));
    classify->add_option("--seed", cls_args.seed);
    classify->add_option("--knn", cls_args.knn, "Use k-nearest-neighbours with this k");
    classify->add_option("--ignore-label", cls_args.ignore_label, "Label value to leave out");
    classify->add_option("--csv", cls_args.csv, "Prefix for per-method fold CSVs");
    classify->add_option("--out", cls_args.out)->required();

    std::string cmp_a, cmp_b;
    double cmp_tol = 1e-10;
    auto* compare = app.add_subcommand("compare", "Max relative Frobenius difference of two covariance rasters");
    compare->add_option("--a", cmp_a)->required();
    compare->add_option("--b", cmp_b)->required();
    compare->add_option("--tol", cmp_tol);

    try {
        // CLI11 consumes a reversed argument list without the program name.
        std::vector<std::string> rev;
        if (!args.empty())
            rev.assign(args.rbegin(), args.rend() - 1);
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error[usage]: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (*simulate)
            return cmd_simulate(sim_args, out);
        if (*calibrate_cmd)
            return cmd_calibrate(cal_args, out);
        if (*estimate)
            return cmd_estimate(est_args, out, err);
        if (*box)
            return cmd_boxcar(box_slc, box_half, box_out, box_threads);
        if (*features)
            return cmd_features(feat_cov, feat_out);
        if (*metrics)
            return cmd_metrics(met_args, out);
        if (*classify)
            return cmd_classify(cls_args, out);
        if (*compare)
            return cmd_compare(cmp_a, cmp_b, cmp_tol, out);
    } catch (const Error& e) {
        err << "error[" << category_name(e.category()) << "]: " << e.what() << "\n";
        return exit_code(e.category());
    } catch (const std::exception& e) {
        err << "error[data]: " << e.what() << "\n";
        return kData;
    }
    err << "error[usage]: no command given\n";
    return kUsage;
}

} // namespace pgnlm::cli
