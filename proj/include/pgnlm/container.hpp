#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include "pgnlm/error.hpp"
#include "pgnlm/types.hpp"

namespace pgnlm::io {

// Container layout (all multi-byte fields little-endian):
//
//   offset  size  field
//        0     6  magic "PGNLM1"
//        6     1  kind (1 SLC, 2 guide, 3 covariance, 4 label)
//        7     4  height (u32)
//       11     4  width  (u32)
//       15     2  bands  (u16)
//       17     -  payload, row-major, channel-interleaved
//
// Payload per pixel:
//   SLC         bands = 3: (re, im) float32 per channel -> 24 bytes
//   guide       bands = B: float32 per band             -> 4B bytes
//   covariance  bands = 9: float32 c11 c22 c33 Re c12 Im c12 Re c13 Im c13
//                          Re c23 Im c23                -> 36 bytes
//   label       bands = 1: u16                           -> 2 bytes
//
// Files must end exactly at the end of the payload.

inline constexpr std::string_view kMagic = "PGNLM1";
inline constexpr std::size_t kHeaderSize = 17;

enum class ContainerKind : std::uint8_t {
    Slc = 1,
    Guide = 2,
    Covariance = 3,
    Label = 4,
};

enum class ContainerErrc {
    BadMagic,
    UnknownKind,
    BadBands,
    EmptyDimension,
    Truncated,
    TrailingBytes,
    NonFinite,
    KindMismatch,
    Io,
};

std::string_view errc_name(ContainerErrc code) noexcept;

class ContainerError : public Error {
public:
    ContainerError(ContainerErrc code, const std::string& what)
        : Error(code == ContainerErrc::Io ? ErrorCategory::Io : ErrorCategory::Format,
                std::string(errc_name(code)) + ": " + what),
          code_(code) {}

    ContainerErrc code() const noexcept { return code_; }

private:
    ContainerErrc code_;
};

using AnyRaster = std::variant<ScatteringImageD, GuideImageD, CovarianceFieldD, LabelImage>;

/// Payload bytes per pixel for a kind/band count.
std::size_t bytes_per_pixel(ContainerKind kind, int bands);

std::string encode(const ScatteringImageD& raster);
std::string encode(const GuideImageD& raster);
std::string encode(const CovarianceFieldD& raster);
std::string encode(const LabelImage& raster);

/// Parses and validates a full container byte stream.
AnyRaster decode(std::string_view bytes);

void write_container(const AnyRaster& raster, const std::string& path);
AnyRaster read_container(const std::string& path);

ScatteringImageD read_slc(const std::string& path);
GuideImageD read_guide(const std::string& path);
CovarianceFieldD read_covariance(const std::string& path);
LabelImage read_labels(const std::string& path);

} // namespace pgnlm::io
