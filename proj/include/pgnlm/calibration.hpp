#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "pgnlm/config.hpp"
#include "pgnlm/core.hpp"
#include "pgnlm/parallel.hpp"

namespace pgnlm {

/// Thresholds derived from a reference set of patch dissimilarities.
struct CalibrationResult {
    double t_pol = 0.0;
    double t_opt = 0.0;
    double p_pol = 50.0;
    double p_opt = 50.0;
    std::size_t n_samples = 0;
    /// Geometry the thresholds were computed with; the estimator refuses a
    /// calibration made with a different window or patch size.
    int search_half = 19;
    int patch_half = 2;
    bool has_optical = false;

    /// Sampled sets, in deterministic (position, candidate) raster order.
    /// Not serialised.
    std::vector<double> d_pol;
    std::vector<double> d_opt;
};

/// Percentile with linear interpolation between closest ranks
/// (rank = p/100 * (n-1)). p = 0 gives the minimum, p = 100 the maximum.
template <typename Scalar>
Scalar percentile(std::vector<Scalar> values, double p) {
    if (values.empty())
        throw Error(ErrorCategory::Data, "percentile of an empty set");
    if (!(p >= 0.0 && p <= 100.0))
        throw Error(ErrorCategory::Usage, "percentile must lie in [0, 100]");
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const double frac = rank - static_cast<double>(lo);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const Scalar lower = values[lo];
    if (frac == 0.0 || lo + 1 >= values.size())
        return lower;
    const Scalar upper = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    return lower + static_cast<Scalar>(frac) * (upper - lower);
}

/// Diagonal centres (i, i) whose full search window, widened by the patch
/// margin, stays inside the image.
inline std::vector<Pixel> diagonal_sample_positions(int height, int width, int search_half,
                                                    int patch_half) {
    const int margin = search_half + patch_half;
    const int diag = std::min(height, width);
    if (diag <= 2 * margin)
        throw Error(ErrorCategory::Geometry,
                    "image " + std::to_string(height) + "x" + std::to_string(width) +
                        " too small for calibration: need min(height, width) > " +
                        std::to_string(2 * margin));
    std::vector<Pixel> out;
    out.reserve(static_cast<std::size_t>(diag - 2 * margin));
    for (int i = margin; i < diag - margin; ++i)
        out.push_back({i, i});
    return out;
}

/// How window centres for the reference set are chosen.
struct CalibrationSampling {
    enum class Mode { Diagonal, Random };
    Mode mode = Mode::Diagonal;
    std::uint64_t seed = 0;
    /// Number of random centres; 0 means as many as the diagonal would give.
    std::size_t centers = 0;
};

/// Interior centres drawn without replacement, sorted in raster order.
inline std::vector<Pixel> random_sample_positions(int height, int width, int search_half,
                                                  int patch_half, std::size_t count,
                                                  std::uint64_t seed) {
    const int margin = search_half + patch_half;
    if (height <= 2 * margin || width <= 2 * margin)
        throw Error(ErrorCategory::Geometry, "image too small for random calibration centres");
    const int rows = height - 2 * margin;
    const int cols = width - 2 * margin;
    std::vector<int> all(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = static_cast<int>(i);
    if (count > all.size())
        throw Error(ErrorCategory::Geometry, "more random centres requested than valid positions");
    std::vector<int> picked;
    picked.reserve(count);
    std::mt19937_64 rng(seed);
    std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
    std::vector<Pixel> out;
    out.reserve(count);
    for (int idx : picked)
        out.push_back({margin + idx / cols, margin + idx % cols});
    return out;
}

namespace detail {

template <typename Scalar>
CalibrationResult calibrate_impl(const ScatteringImage<Scalar>& img, const GuideImage<Scalar>* guide,
                                 const PgnlmConfig& cfg, const CalibrationSampling& sampling,
                                 unsigned threads) {
    if (!(cfg.p_pol >= 0.0 && cfg.p_pol <= 100.0) || !(cfg.p_opt >= 0.0 && cfg.p_opt <= 100.0))
        throw Error(ErrorCategory::Usage, "percentiles must lie in [0, 100]");
    if (guide && (guide->height() != img.height() || guide->width() != img.width()))
        throw Error(ErrorCategory::Geometry, "guide and PolSAR image dimensions differ");

    std::vector<Pixel> centres = diagonal_sample_positions(img.height(), img.width(),
                                                           cfg.search_half, cfg.patch_half);
    if (sampling.mode == CalibrationSampling::Mode::Random) {
        const std::size_t n = sampling.centers ? sampling.centers : centres.size();
        centres = random_sample_positions(img.height(), img.width(), cfg.search_half,
                                          cfg.patch_half, n, sampling.seed);
    }

    const Patch patch = cfg.patch();
    const int hs = cfg.search_half;
    const std::size_t per_centre = static_cast<std::size_t>(cfg.candidates());

    CalibrationResult result;
    result.p_pol = cfg.p_pol;
    result.p_opt = cfg.p_opt;
    result.search_half = cfg.search_half;
    result.patch_half = cfg.patch_half;
    result.has_optical = guide != nullptr;
    result.n_samples = centres.size() * per_centre;
    result.d_pol.assign(result.n_samples, 0.0);
    if (guide)
        result.d_opt.assign(result.n_samples, 0.0);

    // Every sampled patch is interior, so the border policy never applies.
    parallel_for(centres.size(), threads, [&](std::size_t ci) {
        const Pixel t = centres[ci];
        std::size_t k = ci * per_centre;
        for (int dr = -hs; dr <= hs; ++dr)
            for (int dc = -hs; dc <= hs; ++dc, ++k) {
                const Pixel s{t.row + dr, t.col + dc};
                const double dp = static_cast<double>(polsar_patch_dissim(img, t, s, patch));
                if (!std::isfinite(dp))
                    throw Error(ErrorCategory::Data, "non-finite PolSAR dissimilarity during calibration");
                result.d_pol[k] = dp;
                if (guide) {
                    const double dopt = static_cast<double>(optical_patch_dissim(*guide, t, s, patch));
                    if (!std::isfinite(dopt))
                        throw Error(ErrorCategory::Data,
                                    "non-finite optical dissimilarity during calibration");
                    result.d_opt[k] = dopt;
                }
            }
    });

    result.t_pol = percentile(result.d_pol, cfg.p_pol);
    if (guide)
        result.t_opt = percentile(result.d_opt, cfg.p_opt);
    return result;
}

} // namespace detail

/// Percentile thresholds for both dissimilarities, from every (centre,
/// candidate) pair of the sampled search windows. The self pair is included.
template <typename Scalar>
CalibrationResult calibrate(const ScatteringImage<Scalar>& img, const GuideImage<Scalar>& guide,
                            const PgnlmConfig& cfg, const CalibrationSampling& sampling = {},
                            unsigned threads = 0) {
    return detail::calibrate_impl(img, &guide, cfg, sampling, threads);
}

/// PolSAR-only calibration for the unguided estimator; t_opt stays 0.
template <typename Scalar>
CalibrationResult calibrate(const ScatteringImage<Scalar>& img, const PgnlmConfig& cfg,
                            const CalibrationSampling& sampling = {}, unsigned threads = 0) {
    return detail::calibrate_impl<Scalar>(img, nullptr, cfg, sampling, threads);
}

/// key=value text form: t_pol, t_opt, p_pol, p_opt, n_samples, search_half,
/// patch_half, has_optical. Doubles are written with 17 significant digits.
void write_calibration(std::ostream& os, const CalibrationResult& calib);
void save_calibration(const std::string& path, const CalibrationResult& calib);
CalibrationResult read_calibration(std::istream& is);
CalibrationResult load_calibration(const std::string& path);

} // namespace pgnlm
