#include "pgnlm/simulator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include "pgnlm/core.hpp"
#include "pgnlm/error.hpp"
#include "pgnlm/parallel.hpp"

namespace pgnlm::sim {

Rng substream(std::uint64_t seed, std::uint32_t stream, std::uint32_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      stream, index};
    return Rng(seq);
}

double uniform_open0(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

std::pair<double, double> standard_normal_pair(Rng& rng) {
    const double u1 = uniform_open0(rng);
    const double u2 = uniform_open0(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(a), r * std::sin(a)};
}

std::complex<double> standard_circular(Rng& rng) {
    const auto [x, y] = standard_normal_pair(rng);
    return {x * std::numbers::sqrt2 / 2.0, y * std::numbers::sqrt2 / 2.0};
}

void require_positive_definite(const HermitianMatrix3D& sigma, const std::string& what) {
    if (!sigma.allFinite())
        throw Error(ErrorCategory::Data, what + ": covariance has non-finite entries");
    if ((sigma - sigma.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, sigma.cwiseAbs().maxCoeff()))
        throw Error(ErrorCategory::Data, what + ": covariance is not Hermitian");
    Eigen::SelfAdjointEigenSolver<HermitianMatrix3D> es(sigma, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    if (!(lmin > 0.0)) {
        std::ostringstream msg;
        msg << what << ": covariance is not positive definite (smallest eigenvalue "
            << std::setprecision(6) << lmin << ")";
        throw Error(ErrorCategory::Data, msg.str());
    }
}

namespace {

HermitianMatrix3D cholesky_factor(const HermitianMatrix3D& sigma, const std::string& what) {
    require_positive_definite(sigma, what);
    return sigma.llt().matrixL();
}

TargetVectorD draw(const HermitianMatrix3D& lower, Rng& rng) {
    TargetVectorD z;
    for (int i = 0; i < 3; ++i)
        z(i) = standard_circular(rng);
    return lower * z;
}

HermitianMatrix3D hermitian(double c11, double c22, double c33, std::complex<double> c12,
                            std::complex<double> c13, std::complex<double> c23) {
    HermitianMatrix3D m;
    m << c11, c12, c13,
         std::conj(c12), c22, c23,
         std::conj(c13), std::conj(c23), c33;
    return m;
}

Eigen::VectorXd bands(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        out(i++) = x;
    return out;
}

} // namespace

TargetVectorD sample_target_vector(const HermitianMatrix3D& sigma, Rng& rng) {
    return draw(cholesky_factor(sigma, "sample_target_vector"), rng);
}

void SceneSpec::validate() const {
    if (height < 1 || width < 1)
        throw Error(ErrorCategory::Geometry, "scene dimensions must be positive");
    if (class_map.height() != height || class_map.width() != width)
        throw Error(ErrorCategory::Geometry, "class map dimensions differ from scene dimensions");
    if (group_map && (group_map->height() != height || group_map->width() != width))
        throw Error(ErrorCategory::Geometry, "group map dimensions differ from scene dimensions");
    if (classes.empty())
        throw Error(ErrorCategory::Data, "scene has no classes");
    if (!(guide_noise >= 0.0))
        throw Error(ErrorCategory::Data, "guide noise must be >= 0");
    const auto nb = classes.front().guide_mean.size();
    if (nb < 1)
        throw Error(ErrorCategory::Data, "guide needs at least one band");
    for (std::size_t k = 0; k < classes.size(); ++k) {
        const auto& c = classes[k];
        const std::string what = "class " + std::to_string(k);
        if (c.guide_mean.size() != nb)
            throw Error(ErrorCategory::Data, what + ": guide mean has wrong band count");
        if (!c.guide_mean.allFinite())
            throw Error(ErrorCategory::Data, what + ": guide mean is not finite");
        if (c.fixed) {
            if (!c.fixed->allFinite())
                throw Error(ErrorCategory::Data, what + ": fixed target vector is not finite");
        } else {
            require_positive_definite(c.sigma, what);
        }
    }
    for (auto id : class_map)
        if (id >= classes.size())
            throw Error(ErrorCategory::Data, "class map references undefined class " + std::to_string(id));
}

Scene generate_scene(const SceneSpec& spec, unsigned threads) {
    spec.validate();
    std::vector<HermitianMatrix3D> lower(spec.classes.size(), HermitianMatrix3D::Zero());
    for (std::size_t k = 0; k < spec.classes.size(); ++k)
        if (!spec.classes[k].fixed)
            lower[k] = cholesky_factor(spec.classes[k].sigma, "class " + std::to_string(k));

    const int nb = spec.bands();
    Scene scene{ScatteringImageD(spec.height, spec.width), GuideImageD(spec.height, spec.width, nb),
                spec.class_map, spec.group_map};

    parallel_for(static_cast<std::size_t>(spec.height), threads, [&](std::size_t row) {
        const int r = static_cast<int>(row);
        Rng slc_rng = substream(spec.seed, 0, static_cast<std::uint32_t>(row));
        Rng guide_rng = substream(spec.seed, 1, static_cast<std::uint32_t>(row));
        for (int c = 0; c < spec.width; ++c) {
            const auto k = spec.class_map(r, c);
            const ClassModel& cls = spec.classes[k];
            // Draw even for fixed pixels so the stream layout does not depend
            // on the class map.
            TargetVectorD s = draw(lower[k], slc_rng);
            scene.slc(r, c) = cls.fixed ? *cls.fixed : s;
            for (int b = 0; b < nb; ++b) {
                const double noise = standard_normal_pair(guide_rng).first;
                scene.guide(r, c, b) = cls.guide_mean(b) + spec.guide_noise * noise;
            }
        }
    });
    return scene;
}

const std::vector<std::string>& builtin_scene_names() {
    static const std::vector<std::string> names{"homogeneous", "edge2", "checkerboard", "point_target",
                                                "canopy_mosaic"};
    return names;
}

HermitianMatrix3D reference_sigma() {
    return hermitian(1.0, 0.25, 1.0, 0.0, 0.5, 0.0);
}

SceneSpec builtin_scene(const std::string& name, int size, std::uint64_t seed) {
    if (size < 1)
        throw Error(ErrorCategory::Usage, "scene size must be positive");
    SceneSpec spec;
    spec.name = name;
    spec.height = size;
    spec.width = size;
    spec.seed = seed;
    spec.class_map = LabelImage(size, size, 0);
    spec.guide_noise = 0.01;

    // Four guide bands loosely shaped like blue, green, red and NIR reflectance.
    const ClassModel background{"background", reference_sigma(), bands({0.05, 0.08, 0.06, 0.30}), {}};
    const ClassModel second{"second", hermitian(2.0, 0.8, 1.5, 0.0, 0.2, 0.0),
                            bands({0.09, 0.12, 0.14, 0.18}), {}};

    if (name == "homogeneous") {
        spec.classes = {background};
    } else if (name == "edge2") {
        spec.classes = {background, second};
        for (int r = 0; r < size; ++r)
            for (int c = size / 2; c < size; ++c)
                spec.class_map(r, c) = 1;
    } else if (name == "checkerboard") {
        spec.classes = {background, second};
        const int cell = std::max(1, size / 8);
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c)
                spec.class_map(r, c) = static_cast<std::uint16_t>(((r / cell) + (c / cell)) % 2);
    } else if (name == "point_target") {
        TargetVectorD s(10.0, 5.0, 10.0);
        ClassModel point{"point", pgnlm::outer_product(s), bands({0.40, 0.40, 0.40, 0.40}), s};
        spec.classes = {background, point};
        spec.class_map(size / 2, size / 2) = 1;
    } else if (name == "canopy_mosaic") {
        const ClassModel live{"live", hermitian(1.0, 0.34, 0.9, 0.0, 0.30, 0.0),
                              bands({0.03, 0.06, 0.04, 0.34}), {}};
        const ClassModel dead{"dead", hermitian(1.0, 0.22, 0.9, 0.0, 0.50, 0.0),
                              bands({0.05, 0.07, 0.07, 0.24}), {}};
        spec.classes = {live, dead};
        spec.guide_noise = 0.02;
        const int cell = std::max(4, size / 16);
        const int cells_per_row = (size + cell - 1) / cell;
        LabelImage groups(size, size, 0);
        Rng layout = substream(seed, 2, 0);
        std::vector<std::uint16_t> cell_class(static_cast<std::size_t>(cells_per_row * cells_per_row));
        for (auto& cc : cell_class)
            cc = static_cast<std::uint16_t>(layout() >> 63);
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                const int id = (r / cell) * cells_per_row + c / cell;
                groups(r, c) = static_cast<std::uint16_t>(id);
                spec.class_map(r, c) = cell_class[static_cast<std::size_t>(id)];
            }
        spec.group_map = std::move(groups);
    } else {
        throw Error(ErrorCategory::Usage, "unknown scene '" + name + "'");
    }
    return spec;
}

void write_metadata(std::ostream& os, const SceneSpec& spec) {
    os << std::setprecision(17);
    os << "name=" << spec.name << '\n'
       << "seed=" << spec.seed << '\n'
       << "height=" << spec.height << '\n'
       << "width=" << spec.width << '\n'
       << "bands=" << spec.bands() << '\n'
       << "guide_noise=" << spec.guide_noise << '\n'
       << "classes=" << spec.classes.size() << '\n';
    for (std::size_t k = 0; k < spec.classes.size(); ++k) {
        const auto& c = spec.classes[k];
        os << "class." << k << ".name=" << c.name << '\n';
        os << "class." << k << ".sigma=";
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                os << (i || j ? "," : "") << c.sigma(i, j).real() << ',' << c.sigma(i, j).imag();
        os << '\n' << "class." << k << ".guide_mean=";
        for (Eigen::Index b = 0; b < c.guide_mean.size(); ++b)
            os << (b ? "," : "") << c.guide_mean(b);
        os << '\n' << "class." << k << ".fixed=";
        if (c.fixed) {
            for (int i = 0; i < 3; ++i)
                os << (i ? "," : "") << (*c.fixed)(i).real() << ',' << (*c.fixed)(i).imag();
        } else {
            os << "none";
        }
        os << '\n';
    }
}

void save_metadata(const std::string& path, const SceneSpec& spec) {
    std::ofstream os(path);
    if (!os)
        throw Error(ErrorCategory::Io, "cannot open '" + path + "' for writing");
    write_metadata(os, spec);
    if (!os)
        throw Error(ErrorCategory::Io, "failed writing '" + path + "'");
}

SceneTruth read_metadata(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCategory::Format, "metadata line without '=': " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw Error(ErrorCategory::Format, "metadata is missing '" + key + "'");
        return it->second;
    };
    SceneTruth truth;
    try {
        truth.name = get("name");
        truth.seed = std::stoull(get("seed"));
        truth.height = std::stoi(get("height"));
        truth.width = std::stoi(get("width"));
        const int n = std::stoi(get("classes"));
        for (int k = 0; k < n; ++k) {
            std::istringstream ss(get("class." + std::to_string(k) + ".sigma"));
            std::vector<double> v;
            std::string tok;
            while (std::getline(ss, tok, ','))
                v.push_back(std::stod(tok));
            if (v.size() != 18)
                throw Error(ErrorCategory::Format, "class " + std::to_string(k) + " sigma needs 18 values");
            HermitianMatrix3D m;
            for (int i = 0; i < 9; ++i)
                m(i / 3, i % 3) = {v[2 * i], v[2 * i + 1]};
            truth.sigma.push_back(m);
        }
    } catch (const std::logic_error& e) {
        throw Error(ErrorCategory::Format, std::string("malformed metadata value: ") + e.what());
    }
    return truth;
}

SceneTruth load_metadata(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw Error(ErrorCategory::Io, "cannot open '" + path + "'");
    return read_metadata(is);
}

} // namespace pgnlm::sim
