#include "pgnlm/container.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

namespace pgnlm::io {

std::string_view errc_name(ContainerErrc code) noexcept {
    switch (code) {
    case ContainerErrc::BadMagic: return "bad-magic";
    case ContainerErrc::UnknownKind: return "unknown-kind";
    case ContainerErrc::BadBands: return "bad-bands";
    case ContainerErrc::EmptyDimension: return "empty-dimension";
    case ContainerErrc::Truncated: return "truncated";
    case ContainerErrc::TrailingBytes: return "trailing-bytes";
    case ContainerErrc::NonFinite: return "non-finite";
    case ContainerErrc::KindMismatch: return "kind-mismatch";
    case ContainerErrc::Io: return "io";
    }
    return "unknown";
}

std::size_t bytes_per_pixel(ContainerKind kind, int bands) {
    const auto b = static_cast<std::size_t>(bands);
    switch (kind) {
    case ContainerKind::Slc: return b * 8;
    case ContainerKind::Guide: return b * 4;
    case ContainerKind::Covariance: return b * 4;
    case ContainerKind::Label: return b * 2;
    }
    return 0;
}

namespace {

class Writer {
public:
    Writer(ContainerKind kind, int height, int width, int bands) {
        if (height < 1 || width < 1 || bands < 1)
            throw ContainerError(ContainerErrc::EmptyDimension, "raster has an empty dimension");
        const std::size_t payload = static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                                    bytes_per_pixel(kind, bands);
        buf_.reserve(kHeaderSize + payload);
        buf_.append(kMagic);
        u8(static_cast<std::uint8_t>(kind));
        u32(static_cast<std::uint32_t>(height));
        u32(static_cast<std::uint32_t>(width));
        u16(static_cast<std::uint16_t>(bands));
    }

    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i)
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i)
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(double v) {
        const auto f = static_cast<float>(v);
        if (!std::isfinite(f))
            throw ContainerError(ContainerErrc::NonFinite, "value not representable as a finite float32");
        u32(std::bit_cast<std::uint32_t>(f));
    }

    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(bytes_[pos_++]); }
    std::uint16_t u16() {
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i)
            v = static_cast<std::uint16_t>(v | (std::uint16_t{u8()} << (8 * i)));
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= std::uint32_t{u8()} << (8 * i);
        return v;
    }
    double f32() {
        const float f = std::bit_cast<float>(u32());
        if (!std::isfinite(f))
            throw ContainerError(ContainerErrc::NonFinite,
                                 "non-finite payload value at byte offset " + std::to_string(pos_ - 4));
        return static_cast<double>(f);
    }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode(const ScatteringImageD& raster) {
    Writer w(ContainerKind::Slc, raster.height(), raster.width(), 3);
    for (const auto& s : raster)
        for (int ch = 0; ch < 3; ++ch) {
            w.f32(s(ch).real());
            w.f32(s(ch).imag());
        }
    return w.take();
}

std::string encode(const GuideImageD& raster) {
    Writer w(ContainerKind::Guide, raster.height(), raster.width(), raster.bands());
    if (raster.bands() > std::numeric_limits<std::uint16_t>::max())
        throw ContainerError(ContainerErrc::BadBands, "too many guide bands");
    const auto& v = raster.values();
    for (Eigen::Index i = 0; i < v.rows(); ++i)
        for (Eigen::Index b = 0; b < v.cols(); ++b)
            w.f32(v(i, b));
    return w.take();
}

std::string encode(const CovarianceFieldD& raster) {
    Writer w(ContainerKind::Covariance, raster.height(), raster.width(), 9);
    for (const auto& c : raster) {
        w.f32(c(0, 0).real());
        w.f32(c(1, 1).real());
        w.f32(c(2, 2).real());
        w.f32(c(0, 1).real());
        w.f32(c(0, 1).imag());
        w.f32(c(0, 2).real());
        w.f32(c(0, 2).imag());
        w.f32(c(1, 2).real());
        w.f32(c(1, 2).imag());
    }
    return w.take();
}

std::string encode(const LabelImage& raster) {
    Writer w(ContainerKind::Label, raster.height(), raster.width(), 1);
    for (auto v : raster)
        w.u16(v);
    return w.take();
}

AnyRaster decode(std::string_view bytes) {
    if (bytes.size() < kHeaderSize) {
        if (bytes.substr(0, std::min(bytes.size(), kMagic.size())) != kMagic.substr(0, std::min(bytes.size(), kMagic.size())))
            throw ContainerError(ContainerErrc::BadMagic, "file does not start with PGNLM1");
        throw ContainerError(ContainerErrc::Truncated, "header needs " + std::to_string(kHeaderSize) +
                                                           " bytes, file has " + std::to_string(bytes.size()));
    }
    if (bytes.substr(0, kMagic.size()) != kMagic)
        throw ContainerError(ContainerErrc::BadMagic,
                             "expected magic PGNLM1, found '" + std::string(bytes.substr(0, kMagic.size())) + "'");

    Reader rd(bytes.substr(kMagic.size()));
    const std::uint8_t kind_byte = rd.u8();
    const std::uint32_t h32 = rd.u32();
    const std::uint32_t w32 = rd.u32();
    const int bands = rd.u16();
    if (kind_byte < 1 || kind_byte > 4)
        throw ContainerError(ContainerErrc::UnknownKind, "kind byte " + std::to_string(kind_byte));
    const auto kind = static_cast<ContainerKind>(kind_byte);
    if (h32 == 0 || w32 == 0 || bands == 0)
        throw ContainerError(ContainerErrc::EmptyDimension, "raster has an empty dimension");
    if (h32 > static_cast<std::uint32_t>(std::numeric_limits<int>::max()) ||
        w32 > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
        throw ContainerError(ContainerErrc::EmptyDimension, "raster dimension exceeds supported range");
    const int expected_bands = kind == ContainerKind::Slc ? 3 : kind == ContainerKind::Covariance ? 9
                               : kind == ContainerKind::Label ? 1 : bands;
    if (bands != expected_bands)
        throw ContainerError(ContainerErrc::BadBands, "kind " + std::to_string(kind_byte) + " needs " +
                                                          std::to_string(expected_bands) + " bands, header says " +
                                                          std::to_string(bands));

    const int H = static_cast<int>(h32);
    const int W = static_cast<int>(w32);
    const std::size_t expected = kHeaderSize + static_cast<std::size_t>(H) * static_cast<std::size_t>(W) *
                                                   bytes_per_pixel(kind, bands);
    if (bytes.size() < expected)
        throw ContainerError(ContainerErrc::Truncated, "expected " + std::to_string(expected) + " bytes, got " +
                                                           std::to_string(bytes.size()));
    if (bytes.size() > expected)
        throw ContainerError(ContainerErrc::TrailingBytes, "expected " + std::to_string(expected) +
                                                               " bytes, got " + std::to_string(bytes.size()));

    Reader p(bytes.substr(kHeaderSize));
    switch (kind) {
    case ContainerKind::Slc: {
        ScatteringImageD img(H, W);
        for (auto& s : img)
            for (int ch = 0; ch < 3; ++ch) {
                const double re = p.f32();
                const double im = p.f32();
                s(ch) = {re, im};
            }
        return img;
    }
    case ContainerKind::Guide: {
        GuideImageD g(H, W, bands);
        auto& v = g.values();
        for (Eigen::Index i = 0; i < v.rows(); ++i)
            for (Eigen::Index b = 0; b < v.cols(); ++b)
                v(i, b) = p.f32();
        return g;
    }
    case ContainerKind::Covariance: {
        CovarianceFieldD f(H, W);
        for (auto& c : f) {
            double x[9];
            for (double& xi : x)
                xi = p.f32();
            const std::complex<double> c12{x[3], x[4]}, c13{x[5], x[6]}, c23{x[7], x[8]};
            c << x[0], c12, c13,
                 std::conj(c12), x[1], c23,
                 std::conj(c13), std::conj(c23), x[2];
        }
        return f;
    }
    case ContainerKind::Label: {
        LabelImage l(H, W);
        for (auto& v : l)
            v = p.u16();
        return l;
    }
    }
    throw ContainerError(ContainerErrc::UnknownKind, "unreachable");
}

void write_container(const AnyRaster& raster, const std::string& path) {
    const std::string bytes = std::visit([](const auto& r) { return encode(r); }, raster);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw ContainerError(ContainerErrc::Io, "cannot open '" + path + "' for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os)
        throw ContainerError(ContainerErrc::Io, "failed writing '" + path + "'");
}

AnyRaster read_container(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ContainerError(ContainerErrc::Io, "cannot open '" + path + "'");
    const std::string bytes{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    try {
        return decode(bytes);
    } catch (const ContainerError& e) {
        throw ContainerError(e.code(), "'" + path + "': " + e.what());
    }
}

namespace {

template <typename T>
T read_as(const std::string& path, const char* expected) {
    AnyRaster r = read_container(path);
    if (auto* p = std::get_if<T>(&r))
        return std::move(*p);
    throw ContainerError(ContainerErrc::KindMismatch, "'" + path + "' is not a " + expected + " container");
}

} // namespace

ScatteringImageD read_slc(const std::string& path) { return read_as<ScatteringImageD>(path, "SLC"); }
GuideImageD read_guide(const std::string& path) { return read_as<GuideImageD>(path, "guide"); }
CovarianceFieldD read_covariance(const std::string& path) { return read_as<CovarianceFieldD>(path, "covariance"); }
LabelImage read_labels(const std::string& path) { return read_as<LabelImage>(path, "label"); }

} // namespace pgnlm::io
