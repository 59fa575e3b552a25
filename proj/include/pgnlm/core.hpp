#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

#include "pgnlm/types.hpp"

namespace pgnlm {

/// s * s^H. Rank one, trace equal to the total power of s.
template <typename Derived>
HermitianMatrix3<typename Derived::RealScalar> outer_product(const Eigen::MatrixBase<Derived>& s) {
    EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
    return s * s.adjoint();
}

/// Symmetric, scale-normalised distance between two scattering vectors:
///   |a - b|^2 / (0.5 * (|a|^2 + |b|^2)),
/// which lies in [0, 4]. Two exact zero vectors are identical, so 0.
template <typename DerivedA, typename DerivedB>
typename DerivedA::RealScalar vector_dissim(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
    using Real = typename DerivedA::RealScalar;
    const Real den = Real(0.5) * (a.squaredNorm() + b.squaredNorm());
    if (den == Real(0))
        return Real(0);
    return (a - b).squaredNorm() / den;
}

/// Same as vector_dissim but with precomputed squared norms; used by the
/// inner loops where norms are cached per pixel.
template <typename Scalar>
inline Scalar vector_dissim_cached(const TargetVector<Scalar>& a, Scalar norm_a,
                                   const TargetVector<Scalar>& b, Scalar norm_b) {
    const Scalar den = Scalar(0.5) * (norm_a + norm_b);
    if (den == Scalar(0))
        return Scalar(0);
    return (a - b).squaredNorm() / den;
}

namespace detail {

template <typename Scalar>
const TargetVector<Scalar>& sample(const ScatteringImage<Scalar>& img, int row, int col,
                                   BorderPolicy border) {
    static const TargetVector<Scalar> zero = TargetVector<Scalar>::Zero();
    if (border == BorderPolicy::Zero &&
        (row < 0 || col < 0 || row >= img.height() || col >= img.width()))
        return zero;
    return img(mirror_index(row, img.height()), mirror_index(col, img.width()));
}

template <typename Scalar>
Scalar sample(const GuideImage<Scalar>& guide, int row, int col, int band, BorderPolicy border) {
    if (border == BorderPolicy::Zero &&
        (row < 0 || col < 0 || row >= guide.height() || col >= guide.width()))
        return Scalar(0);
    return guide(mirror_index(row, guide.height()), mirror_index(col, guide.width()), band);
}

} // namespace detail

/// Mean of vector_dissim over corresponding pixels of the patches centred on
/// t and s. Summation runs in raster order of the patch offsets so the value
/// is bit-identical when t and s are swapped.
template <typename Scalar>
Scalar polsar_patch_dissim(const ScatteringImage<Scalar>& img, Pixel t, Pixel s, const Patch& patch,
                           BorderPolicy border = BorderPolicy::Mirror) {
    Scalar sum(0);
    for (int dr = -patch.half; dr <= patch.half; ++dr)
        for (int dc = -patch.half; dc <= patch.half; ++dc)
            sum += vector_dissim(detail::sample(img, t.row + dr, t.col + dc, border),
                                 detail::sample(img, s.row + dr, s.col + dc, border));
    return sum / Scalar(patch.npix());
}

/// Mean squared difference between two guide patches, averaged over bands
/// and patch pixels.
template <typename Scalar>
Scalar optical_patch_dissim(const GuideImage<Scalar>& guide, Pixel t, Pixel s, const Patch& patch,
                            BorderPolicy border = BorderPolicy::Mirror) {
    Scalar sum(0);
    for (int b = 0; b < guide.bands(); ++b)
        for (int dr = -patch.half; dr <= patch.half; ++dr)
            for (int dc = -patch.half; dc <= patch.half; ++dc) {
                const Scalar diff = detail::sample(guide, s.row + dr, s.col + dc, b, border) -
                                    detail::sample(guide, t.row + dr, t.col + dc, b, border);
                sum += diff * diff;
            }
    return sum / (Scalar(guide.bands()) * Scalar(patch.npix()));
}

/// Exponential kernel on percentile-normalised dissimilarities:
///   exp(-lambda * (gamma * d_pol + (1 - gamma) * d_opt)).
template <typename Scalar>
Scalar pgnlm_weight(Scalar d_pol_norm, Scalar d_opt_norm, Scalar gamma, Scalar lambda) {
    return std::exp(-lambda * (gamma * d_pol_norm + (Scalar(1) - gamma) * d_opt_norm));
}

/// Smallest eigenvalue of the Hermitian part of m.
template <typename Scalar>
Scalar min_eigenvalue(const HermitianMatrix3<Scalar>& m) {
    Eigen::SelfAdjointEigenSolver<HermitianMatrix3<Scalar>> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues()(0);
}

/// Hermitian to within eps*trace and min eigenvalue >= -eps*trace.
template <typename Scalar>
bool is_hermitian_psd(const HermitianMatrix3<Scalar>& m, Scalar eps = Scalar(1e-9)) {
    if (!m.allFinite())
        return false;
    const Scalar trace = m.trace().real();
    if (trace < Scalar(0))
        return false;
    const Scalar scale = std::max(trace, std::numeric_limits<Scalar>::min());
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > eps * scale)
        return false;
    for (int i = 0; i < 3; ++i)
        if (m(i, i).real() < -eps * scale)
            return false;
    return min_eigenvalue(m) >= -eps * scale;
}

} // namespace pgnlm
