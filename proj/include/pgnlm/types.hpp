#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pgnlm/error.hpp"

namespace pgnlm {

/// Lexicographic scattering vector [S_HH, S_HV, S_VV]. The cross-pol channel
/// is assumed to be already symmetrised by the producer.
template <typename Scalar>
using TargetVector = Eigen::Matrix<std::complex<Scalar>, 3, 1>;

/// 3x3 polarimetric covariance matrix. Stored densely; every producer in this
/// library writes both triangles so the matrix is Hermitian by construction.
template <typename Scalar>
using HermitianMatrix3 = Eigen::Matrix<std::complex<Scalar>, 3, 3>;

using TargetVectorD = TargetVector<double>;
using HermitianMatrix3D = HermitianMatrix3<double>;

struct Pixel {
    int row = 0;
    int col = 0;

    friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Row-major grid of per-pixel values.
template <typename T>
class Raster {
public:
    using value_type = T;

    Raster() = default;

    Raster(int height, int width, const T& fill = T{})
        : height_(height), width_(width) {
        check_dims(height, width);
        data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
    }

    Raster(int height, int width, std::vector<T> data)
        : height_(height), width_(width), data_(std::move(data)) {
        check_dims(height, width);
        if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
            throw Error(ErrorCategory::Geometry,
                        "raster data length " + std::to_string(data_.size()) + " does not match " +
                            std::to_string(height) + "x" + std::to_string(width));
    }

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(int row, int col) { return data_[index(row, col)]; }
    const T& operator()(int row, int col) const { return data_[index(row, col)]; }
    T& operator[](Pixel p) { return (*this)(p.row, p.col); }
    const T& operator[](Pixel p) const { return (*this)(p.row, p.col); }

    bool contains(Pixel p) const noexcept {
        return p.row >= 0 && p.col >= 0 && p.row < height_ && p.col < width_;
    }

    std::size_t index(int row, int col) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(col);
    }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    friend bool operator==(const Raster& a, const Raster& b) {
        return a.height_ == b.height_ && a.width_ == b.width_ && a.data_ == b.data_;
    }

private:
    static void check_dims(int height, int width) {
        if (height < 1 || width < 1)
            throw Error(ErrorCategory::Geometry, "raster dimensions must be positive, got " +
                                                     std::to_string(height) + "x" +
                                                     std::to_string(width));
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

template <typename Scalar>
using ScatteringImage = Raster<TargetVector<Scalar>>;

template <typename Scalar>
using CovarianceField = Raster<HermitianMatrix3<Scalar>>;

using LabelImage = Raster<std::uint16_t>;

/// Multi-band real raster. Each row of `values()` is one pixel, each column a band.
template <typename Scalar>
class GuideImage {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    GuideImage() = default;

    GuideImage(int height, int width, int bands)
        : height_(height), width_(width), values_(Matrix::Zero(Eigen::Index(height) * width, bands)) {
        check(height, width, bands);
    }

    GuideImage(int height, int width, Matrix values)
        : height_(height), width_(width), values_(std::move(values)) {
        check(height, width, static_cast<int>(values_.cols()));
        if (values_.rows() != Eigen::Index(height) * width)
            throw Error(ErrorCategory::Geometry, "guide value matrix has " +
                                                     std::to_string(values_.rows()) +
                                                     " rows, expected height*width");
    }

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int bands() const noexcept { return static_cast<int>(values_.cols()); }

    Scalar& operator()(int row, int col, int band) {
        return values_(Eigen::Index(row) * width_ + col, band);
    }
    Scalar operator()(int row, int col, int band) const {
        return values_(Eigen::Index(row) * width_ + col, band);
    }

    auto pixel(int row, int col) const { return values_.row(Eigen::Index(row) * width_ + col); }
    auto pixel(int row, int col) { return values_.row(Eigen::Index(row) * width_ + col); }

    const Matrix& values() const noexcept { return values_; }
    Matrix& values() noexcept { return values_; }

    friend bool operator==(const GuideImage& a, const GuideImage& b) {
        return a.height_ == b.height_ && a.width_ == b.width_ && a.values_.cols() == b.values_.cols() &&
               a.values_ == b.values_;
    }

private:
    static void check(int height, int width, int bands) {
        if (height < 1 || width < 1 || bands < 1)
            throw Error(ErrorCategory::Geometry, "guide dimensions must be positive, got " +
                                                     std::to_string(height) + "x" +
                                                     std::to_string(width) + "x" +
                                                     std::to_string(bands));
    }

    int height_ = 0;
    int width_ = 0;
    Matrix values_;
};

using ScatteringImageD = ScatteringImage<double>;
using CovarianceFieldD = CovarianceField<double>;
using GuideImageD = GuideImage<double>;

/// How out-of-image samples are resolved when a patch or search window
/// extends past the border.
enum class BorderPolicy {
    Mirror, ///< reflect without repeating the edge sample: -1 -> 1, n -> n-2
    Zero,   ///< out-of-image samples read as zero
};

/// Square patch of side 2*half+1 centred on the pixel of interest.
struct Patch {
    int half = 0;

    int side() const noexcept { return 2 * half + 1; }
    int npix() const noexcept { return side() * side(); }

    /// Offsets in raster order; the centre offset (0,0) is always included.
    std::vector<Pixel> offsets() const {
        std::vector<Pixel> out;
        out.reserve(static_cast<std::size_t>(npix()));
        for (int dr = -half; dr <= half; ++dr)
            for (int dc = -half; dc <= half; ++dc)
                out.push_back({dr, dc});
        return out;
    }
};

/// Reflect an index into [0, n) without repeating the edge sample. Handles
/// offsets larger than n by repeated reflection.
inline int mirror_index(int i, int n) noexcept {
    if (n == 1)
        return 0;
    const int period = 2 * (n - 1);
    int m = i % period;
    if (m < 0)
        m += period;
    return m < n ? m : period - m;
}

template <typename T>
bool all_finite(const Raster<T>& raster) {
    for (const auto& v : raster)
        if (!v.allFinite())
            return false;
    return true;
}

template <typename Scalar>
bool all_finite(const GuideImage<Scalar>& guide) {
    return guide.values().allFinite();
}

} // namespace pgnlm
