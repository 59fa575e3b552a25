#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <numeric>
#include <span>
#include <vector>

#include "pgnlm/calibration.hpp"
#include "pgnlm/config.hpp"
#include "pgnlm/core.hpp"
#include "pgnlm/parallel.hpp"

namespace pgnlm {

/// Per-pixel predictor count |Omega''(t)| and weight sum N(t).
struct EstimatorDiagnostics {
    Raster<int> predictors_used;
    Raster<double> weight_sum;
};

template <typename Scalar>
struct EstimateResult {
    CovarianceField<Scalar> field;
    EstimatorDiagnostics diagnostics;
};

/// One accepted predictor. `candidate` indexes the search window in raster
/// order (0 .. S-1).
struct Predictor {
    int candidate = 0;
    Pixel pixel;
    double d_pol = 0.0;
    double d_opt = 0.0;
    double weight = 0.0;
};

template <typename Scalar>
struct PixelEstimate {
    HermitianMatrix3<Scalar> cov = HermitianMatrix3<Scalar>::Zero();
    int predictors = 0;
    double weight_sum = 0.0;
    std::vector<Predictor> selected;
};

/// d / T, with 0/0 taken as 0 and d/0 as +inf.
inline double normalize_dissim(double d, double threshold) {
    if (threshold > 0.0)
        return d / threshold;
    return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

/// Two-stage predictor rejection.
///
/// Stage one keeps candidates with d_pol <= t_pol. Stage two keeps at most
/// s_max of those, smallest `rank_key` first, ties resolved by candidate index
/// (raster order of the search window). Candidates with a non-finite d_pol or
/// rank_key are never kept. The centre candidate is always kept and always
/// placed first. Returns candidate indices in selection order.
inline std::vector<int> select_predictors(std::span<const double> d_pol,
                                          std::span<const double> rank_key, double t_pol,
                                          int s_max, int centre) {
    if (d_pol.size() != rank_key.size())
        throw Error(ErrorCategory::Usage, "candidate lists are not aligned");
    if (centre < 0 || static_cast<std::size_t>(centre) >= d_pol.size())
        throw Error(ErrorCategory::Usage, "centre index out of range");

    std::vector<int> kept;
    kept.reserve(d_pol.size());
    for (int i = 0; i < static_cast<int>(d_pol.size()); ++i) {
        if (i == centre)
            continue;
        const double dp = d_pol[static_cast<std::size_t>(i)];
        const double key = rank_key[static_cast<std::size_t>(i)];
        if (std::isfinite(dp) && std::isfinite(key) && dp <= t_pol)
            kept.push_back(i);
    }

    const std::size_t room = static_cast<std::size_t>(std::max(s_max, 1) - 1);
    const std::size_t take = std::min(room, kept.size());
    auto by_key = [&](int a, int b) {
        const double ka = rank_key[static_cast<std::size_t>(a)];
        const double kb = rank_key[static_cast<std::size_t>(b)];
        return ka < kb || (ka == kb && a < b);
    };
    std::partial_sort(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(take), kept.end(), by_key);
    kept.resize(take);
    kept.insert(kept.begin(), centre);
    return kept;
}

namespace detail {

inline void check_calibration(const PgnlmConfig& cfg, const CalibrationResult& calib) {
    if (calib.n_samples == 0)
        throw Error(ErrorCategory::Calibration, "missing calibration");
    if (calib.search_half != cfg.search_half || calib.patch_half != cfg.patch_half)
        throw Error(ErrorCategory::Calibration,
                    "calibration geometry (search " + std::to_string(calib.search_half) + ", patch " +
                        std::to_string(calib.patch_half) + ") does not match estimator (search " +
                        std::to_string(cfg.search_half) + ", patch " +
                        std::to_string(cfg.patch_half) + ")");
    if (cfg.guided && !calib.has_optical)
        throw Error(ErrorCategory::Calibration,
                    "guided estimation needs a calibration that includes the optical guide");
}

template <typename Scalar>
void check_inputs(const ScatteringImage<Scalar>& img, const GuideImage<Scalar>* guide,
                  const PgnlmConfig& cfg) {
    cfg.validate();
    if (cfg.guided) {
        if (!guide)
            throw Error(ErrorCategory::Usage, "guided estimation needs a guide image");
        if (guide->height() != img.height() || guide->width() != img.width())
            throw Error(ErrorCategory::Geometry,
                        "guide is " + std::to_string(guide->height()) + "x" +
                            std::to_string(guide->width()) + " but PolSAR image is " +
                            std::to_string(img.height()) + "x" + std::to_string(img.width()));
    }
}

/// Selection and weighting shared by the per-pixel and whole-image paths.
/// `d_pol` and `d_opt` are raw dissimilarities for every window candidate.
template <typename Scalar, typename SampleAt>
PixelEstimate<Scalar> combine_predictors(std::span<const double> d_pol, std::span<const double> d_opt,
                                         const PgnlmConfig& cfg, const CalibrationResult& calib,
                                         Pixel t, SampleAt&& sample_at, bool keep_detail,
                                         std::vector<double>& scratch) {
    const int side = cfg.search_side();
    const int centre = cfg.search_half * side + cfg.search_half;
    const double t_accept = calib.p_pol >= 100.0 ? std::numeric_limits<double>::infinity() : calib.t_pol;

    std::span<const double> rank_key = d_pol;
    if (cfg.guided) {
        scratch.resize(d_opt.size());
        for (std::size_t i = 0; i < d_opt.size(); ++i)
            scratch[i] = normalize_dissim(d_opt[i], calib.t_opt);
        rank_key = scratch;
    }
    const std::vector<int> chosen = select_predictors(d_pol, rank_key, t_accept, cfg.s_max, centre);

    PixelEstimate<Scalar> out;
    out.predictors = static_cast<int>(chosen.size());
    if (keep_detail)
        out.selected.reserve(chosen.size());
    HermitianMatrix3<Scalar> acc = HermitianMatrix3<Scalar>::Zero();
    double wsum = 0.0;
    for (int k : chosen) {
        const auto ks = static_cast<std::size_t>(k);
        const double dpn = normalize_dissim(d_pol[ks], calib.t_pol);
        const double don = cfg.guided ? scratch[ks] : 0.0;
        const double w = cfg.guided ? pgnlm_weight(dpn, don, cfg.gamma, cfg.lambda)
                                    : pgnlm_weight(dpn, 0.0, 1.0, cfg.lambda);
        const Pixel s{t.row + k / side - cfg.search_half, t.col + k % side - cfg.search_half};
        const TargetVector<Scalar>& v = sample_at(s);
        acc.noalias() += static_cast<Scalar>(w) * (v * v.adjoint());
        wsum += w;
        if (keep_detail)
            out.selected.push_back({k, s, d_pol[ks], cfg.guided ? d_opt[ks] : 0.0, w});
    }
    out.cov = acc / static_cast<Scalar>(wsum);
    out.weight_sum = wsum;
    return out;
}

template <typename Scalar>
void check_finite_inputs(const ScatteringImage<Scalar>& img, const GuideImage<Scalar>* guide) {
    if (!all_finite(img))
        throw Error(ErrorCategory::Data, "PolSAR image contains non-finite values");
    if (guide && !all_finite(*guide))
        throw Error(ErrorCategory::Data, "guide image contains non-finite values");
}

} // namespace detail

/// Covariance estimate at a single pixel, evaluated directly from the patch
/// dissimilarity functions. The returned estimate lists every selected
/// predictor with its dissimilarities and weight.
template <typename Scalar>
PixelEstimate<Scalar> estimate_pixel(const ScatteringImage<Scalar>& img, const GuideImage<Scalar>* guide,
                                     Pixel t, const PgnlmConfig& cfg, const CalibrationResult& calib) {
    detail::check_inputs(img, guide, cfg);
    detail::check_calibration(cfg, calib);
    if (!img.contains(t))
        throw Error(ErrorCategory::Geometry, "pixel outside image");

    const Patch patch = cfg.patch();
    const int hs = cfg.search_half;
    std::vector<double> d_pol, d_opt;
    d_pol.reserve(static_cast<std::size_t>(cfg.candidates()));
    for (int dr = -hs; dr <= hs; ++dr)
        for (int dc = -hs; dc <= hs; ++dc) {
            const Pixel s{t.row + dr, t.col + dc};
            d_pol.push_back(static_cast<double>(polsar_patch_dissim(img, t, s, patch, cfg.border)));
            if (cfg.guided)
                d_opt.push_back(static_cast<double>(optical_patch_dissim(*guide, t, s, patch, cfg.border)));
        }
    if (!cfg.guided)
        d_opt.assign(d_pol.size(), 0.0);

    std::vector<double> scratch;
    auto sample_at = [&](Pixel s) -> const TargetVector<Scalar>& {
        return detail::sample(img, s.row, s.col, cfg.border);
    };
    return detail::combine_predictors<Scalar>(d_pol, d_opt, cfg, calib, t, sample_at, true, scratch);
}

namespace detail {

/// Image copy padded by `pad` on every side under the border policy, with
/// cached squared norms.
template <typename Scalar>
struct PaddedPolsar {
    int pad = 0;
    int stride = 0;
    std::vector<TargetVector<Scalar>> vec;
    std::vector<Scalar> norm;

    PaddedPolsar(const ScatteringImage<Scalar>& img, int pad_, BorderPolicy border) : pad(pad_) {
        stride = img.width() + 2 * pad;
        const int rows = img.height() + 2 * pad;
        vec.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(stride));
        norm.resize(vec.size());
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < stride; ++c) {
                const auto i = static_cast<std::size_t>(r) * static_cast<std::size_t>(stride) +
                               static_cast<std::size_t>(c);
                vec[i] = sample(img, r - pad, c - pad, border);
                norm[i] = vec[i].squaredNorm();
            }
    }

    std::size_t at(int row, int col) const {
        return static_cast<std::size_t>(row + pad) * static_cast<std::size_t>(stride) +
               static_cast<std::size_t>(col + pad);
    }
};

template <typename Scalar>
struct PaddedGuide {
    int pad = 0;
    int stride = 0;
    int bands = 0;
    std::vector<Scalar> val;

    PaddedGuide(const GuideImage<Scalar>& guide, int pad_, BorderPolicy border)
        : pad(pad_), bands(guide.bands()) {
        stride = guide.width() + 2 * pad;
        const int rows = guide.height() + 2 * pad;
        val.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(stride) *
                   static_cast<std::size_t>(bands));
        std::size_t i = 0;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < stride; ++c)
                for (int b = 0; b < bands; ++b)
                    val[i++] = sample(guide, r - pad, c - pad, b, border);
    }

    const Scalar* at(int row, int col) const {
        return val.data() + (static_cast<std::size_t>(row + pad) * static_cast<std::size_t>(stride) +
                             static_cast<std::size_t>(col + pad)) *
                                static_cast<std::size_t>(bands);
    }
};

} // namespace detail

/// PGNLM covariance estimate for every pixel.
///
/// With cfg.guided the optical guide ranks the thresholded candidates and
/// enters the weights. Without it (guide may be null) the estimator keeps the
/// s_max candidates with the lowest PolSAR dissimilarity and weights them by
/// exp(-lambda * d_pol / T_pol), independent of cfg.gamma.
///
/// Dissimilarities for one output row are computed per window offset as
/// column sums reused across neighbouring targets; rows are processed in
/// parallel and results do not depend on `threads`.
template <typename Scalar>
EstimateResult<Scalar> estimate_image(const ScatteringImage<Scalar>& img, const GuideImage<Scalar>* guide,
                                      const PgnlmConfig& cfg, const CalibrationResult& calib,
                                      unsigned threads = 0) {
    detail::check_inputs(img, guide, cfg);
    detail::check_calibration(cfg, calib);
    detail::check_finite_inputs(img, cfg.guided ? guide : nullptr);

    const int H = img.height();
    const int W = img.width();
    const int hs = cfg.search_half;
    const int hp = cfg.patch_half;
    const int side = cfg.search_side();
    const int S = cfg.candidates();
    const int pad = hs + hp;
    const double inv_npix = 1.0 / static_cast<double>(cfg.patch().npix());

    const detail::PaddedPolsar<Scalar> pol(img, pad, cfg.border);
    std::optional<detail::PaddedGuide<Scalar>> opt;
    if (cfg.guided)
        opt.emplace(*guide, pad, cfg.border);
    const double inv_bands = cfg.guided ? 1.0 / static_cast<double>(guide->bands()) : 0.0;

    EstimateResult<Scalar> result{CovarianceField<Scalar>(H, W),
                                  {Raster<int>(H, W, 0), Raster<double>(H, W, 0.0)}};

    parallel_for(static_cast<std::size_t>(H), threads, [&](std::size_t row_index) {
        const int r = static_cast<int>(row_index);
        const int ncols = W + 2 * hp;
        // Candidate-major: d[k * W + c] for target column c.
        std::vector<double> d_pol(static_cast<std::size_t>(S) * static_cast<std::size_t>(W));
        std::vector<double> d_opt(cfg.guided ? d_pol.size() : 0);
        std::vector<double> col_pol(static_cast<std::size_t>(ncols));
        std::vector<double> col_opt(static_cast<std::size_t>(ncols));

        for (int k = 0; k < S; ++k) {
            const int dr = k / side - hs;
            const int dc = k % side - hs;
            for (int q = 0; q < ncols; ++q) {
                const int c = q - hp;
                double sp = 0.0;
                double so = 0.0;
                for (int ar = -hp; ar <= hp; ++ar) {
                    const std::size_t a = pol.at(r + ar, c);
                    const std::size_t b = pol.at(r + ar + dr, c + dc);
                    sp += static_cast<double>(
                        vector_dissim_cached(pol.vec[a], pol.norm[a], pol.vec[b], pol.norm[b]));
                    if (cfg.guided) {
                        const Scalar* ga = opt->at(r + ar, c);
                        const Scalar* gb = opt->at(r + ar + dr, c + dc);
                        for (int band = 0; band < opt->bands; ++band) {
                            const double diff = static_cast<double>(gb[band] - ga[band]);
                            so += diff * diff;
                        }
                    }
                }
                col_pol[static_cast<std::size_t>(q)] = sp;
                col_opt[static_cast<std::size_t>(q)] = so;
            }
            double* out_pol = d_pol.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(W);
            double* out_opt = cfg.guided ? d_opt.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(W)
                                         : nullptr;
            for (int c = 0; c < W; ++c) {
                double sp = 0.0;
                double so = 0.0;
                for (int ac = 0; ac <= 2 * hp; ++ac) {
                    sp += col_pol[static_cast<std::size_t>(c + ac)];
                    so += col_opt[static_cast<std::size_t>(c + ac)];
                }
                out_pol[c] = sp * inv_npix;
                if (out_opt)
                    out_opt[c] = so * inv_npix * inv_bands;
            }
        }

        std::vector<double> cand_pol(static_cast<std::size_t>(S));
        std::vector<double> cand_opt(static_cast<std::size_t>(S), 0.0);
        std::vector<double> scratch;
        for (int c = 0; c < W; ++c) {
            for (int k = 0; k < S; ++k) {
                const std::size_t src = static_cast<std::size_t>(k) * static_cast<std::size_t>(W) +
                                        static_cast<std::size_t>(c);
                cand_pol[static_cast<std::size_t>(k)] = d_pol[src];
                if (cfg.guided)
                    cand_opt[static_cast<std::size_t>(k)] = d_opt[src];
            }
            auto sample_at = [&](Pixel s) -> const TargetVector<Scalar>& {
                return pol.vec[pol.at(s.row, s.col)];
            };
            const Pixel t{r, c};
            PixelEstimate<Scalar> est = detail::combine_predictors<Scalar>(
                cand_pol, cand_opt, cfg, calib, t, sample_at, false, scratch);
            result.field(r, c) = est.cov;
            result.diagnostics.predictors_used(r, c) = est.predictors;
            result.diagnostics.weight_sum(r, c) = est.weight_sum;
        }
    });
    return result;
}

/// Unweighted mean of outer products over a (2*half+1)^2 window.
template <typename Scalar>
CovarianceField<Scalar> boxcar(const ScatteringImage<Scalar>& img, int window_half,
                               BorderPolicy border = BorderPolicy::Mirror, unsigned threads = 0) {
    if (window_half < 0)
        throw Error(ErrorCategory::Usage, "boxcar half-width must be >= 0");
    const int H = img.height();
    const int W = img.width();
    const detail::PaddedPolsar<Scalar> pol(img, window_half, border);
    const Scalar inv = Scalar(1) / Scalar((2 * window_half + 1) * (2 * window_half + 1));
    CovarianceField<Scalar> out(H, W);
    parallel_for(static_cast<std::size_t>(H), threads, [&](std::size_t row_index) {
        const int r = static_cast<int>(row_index);
        for (int c = 0; c < W; ++c) {
            HermitianMatrix3<Scalar> acc = HermitianMatrix3<Scalar>::Zero();
            for (int dr = -window_half; dr <= window_half; ++dr)
                for (int dc = -window_half; dc <= window_half; ++dc) {
                    const auto& v = pol.vec[pol.at(r + dr, c + dc)];
                    acc.noalias() += v * v.adjoint();
                }
            out(r, c) = acc * inv;
        }
    });
    return out;
}

/// s * s^H at every pixel (the single-look estimate).
template <typename Scalar>
CovarianceField<Scalar> outer_products(const ScatteringImage<Scalar>& img) {
    CovarianceField<Scalar> out(img.height(), img.width());
    for (std::size_t i = 0; i < img.size(); ++i)
        out.data()[i] = outer_product(img.data()[i]);
    return out;
}

} // namespace pgnlm
