#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pgnlm/types.hpp"

namespace pgnlm::sim {

/// Random streams are std::mt19937_64 engines seeded through std::seed_seq,
/// both of which are fully specified by the C++ standard. Normal deviates
/// come from Box-Muller on 53-bit uniforms (see standard_normal_pair), so a
/// reimplementation in another language reproduces the same samples.
using Rng = std::mt19937_64;

/// Engine for substream (`stream`, `index`) of a 64-bit seed:
/// seed_seq{seed_lo32, seed_hi32, stream, index}.
Rng substream(std::uint64_t seed, std::uint32_t stream, std::uint32_t index);

/// Uniform in (0, 1]: ((x >> 11) + 1) * 2^-53.
double uniform_open0(Rng& rng);

/// Two independent N(0, 1) draws by Box-Muller from two successive uniforms
/// u1, u2: r = sqrt(-2 ln u1), (r cos 2*pi*u2, r sin 2*pi*u2).
std::pair<double, double> standard_normal_pair(Rng& rng);

/// Circular complex Gaussian with E|z|^2 = 1 (real and imaginary N(0, 1/2)).
std::complex<double> standard_circular(Rng& rng);

/// Zero-mean circular complex Gaussian vector with covariance sigma, drawn as
/// L z with L the Cholesky factor of sigma. Throws Error(Data) when sigma is
/// not Hermitian positive definite.
TargetVectorD sample_target_vector(const HermitianMatrix3D& sigma, Rng& rng);

/// Throws unless sigma is Hermitian with strictly positive eigenvalues; the
/// message names the smallest eigenvalue.
void require_positive_definite(const HermitianMatrix3D& sigma, const std::string& what);

struct ClassModel {
    std::string name;
    HermitianMatrix3D sigma = HermitianMatrix3D::Identity();
    Eigen::VectorXd guide_mean;
    /// When set, every pixel of the class takes exactly this value instead of
    /// a random draw (point scatterers). sigma is then fixed * fixed^H.
    std::optional<TargetVectorD> fixed;
};

struct SceneSpec {
    std::string name = "custom";
    int height = 0;
    int width = 0;
    LabelImage class_map;
    /// Optional grouping (e.g. mosaic cells) for grouped cross-validation.
    std::optional<LabelImage> group_map;
    std::vector<ClassModel> classes;
    double guide_noise = 0.0;
    std::uint64_t seed = 0;

    int bands() const { return classes.empty() ? 0 : static_cast<int>(classes.front().guide_mean.size()); }

    /// Throws Error(Data/Geometry) on any violated invariant.
    void validate() const;
};

struct Scene {
    ScatteringImageD slc;
    GuideImageD guide;
    LabelImage class_map;
    std::optional<LabelImage> group_map;
};

/// Draws the PolSAR image row by row (substream 0, row index) and the guide
/// row by row (substream 1, row index); the result is independent of how
/// rows are scheduled.
Scene generate_scene(const SceneSpec& spec, unsigned threads = 0);

/// Names accepted by builtin_scene.
const std::vector<std::string>& builtin_scene_names();

/// Parameterised test scenes:
///  - homogeneous:   one class
///  - edge2:         two classes split at column size/2
///  - checkerboard:  two classes in size/8 squares
///  - point_target:  homogeneous background and one deterministic pixel with
///                   100x the background power at (size/2, size/2)
///  - canopy_mosaic: live/dead canopy cells differing in cross-pol share and
///                   HH-VV correlation, one group per cell
SceneSpec builtin_scene(const std::string& name, int size, std::uint64_t seed = 0);

/// Background covariance used by several builtin scenes:
/// diag(1, 0.25, 1) with c13 = 0.5.
HermitianMatrix3D reference_sigma();

/// Plain-text key=value sidecar: name, seed, geometry, noise and every
/// class's covariance (row-major re/im pairs), guide mean and fixed vector.
void write_metadata(std::ostream& os, const SceneSpec& spec);
void save_metadata(const std::string& path, const SceneSpec& spec);

/// Per-class truth recovered from a sidecar.
struct SceneTruth {
    std::string name;
    std::uint64_t seed = 0;
    int height = 0;
    int width = 0;
    std::vector<HermitianMatrix3D> sigma;
};

SceneTruth read_metadata(std::istream& is);
SceneTruth load_metadata(const std::string& path);

} // namespace pgnlm::sim
