#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include "pgnlm/calibration.hpp"

namespace pgnlm {

void write_calibration(std::ostream& os, const CalibrationResult& calib) {
    os << std::setprecision(17)
       << "t_pol=" << calib.t_pol << '\n'
       << "t_opt=" << calib.t_opt << '\n'
       << "p_pol=" << calib.p_pol << '\n'
       << "p_opt=" << calib.p_opt << '\n'
       << "n_samples=" << calib.n_samples << '\n'
       << "search_half=" << calib.search_half << '\n'
       << "patch_half=" << calib.patch_half << '\n'
       << "has_optical=" << (calib.has_optical ? 1 : 0) << '\n';
}

void save_calibration(const std::string& path, const CalibrationResult& calib) {
    std::ofstream os(path);
    if (!os)
        throw Error(ErrorCategory::Io, "cannot open '" + path + "' for writing");
    write_calibration(os, calib);
    if (!os)
        throw Error(ErrorCategory::Io, "failed writing '" + path + "'");
}

CalibrationResult read_calibration(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCategory::Format, "calibration line without '=': " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw Error(ErrorCategory::Format, std::string("calibration is missing '") + key + "'");
        return it->second;
    };

    CalibrationResult c;
    try {
        c.t_pol = std::stod(get("t_pol"));
        c.t_opt = std::stod(get("t_opt"));
        c.p_pol = std::stod(get("p_pol"));
        c.p_opt = std::stod(get("p_opt"));
        c.n_samples = std::stoull(get("n_samples"));
        c.search_half = std::stoi(get("search_half"));
        c.patch_half = std::stoi(get("patch_half"));
        c.has_optical = kv.count("has_optical") ? std::stoi(kv["has_optical"]) != 0 : true;
    } catch (const std::logic_error& e) {
        throw Error(ErrorCategory::Format, std::string("malformed calibration value: ") + e.what());
    }
    if (!(c.t_pol >= 0.0 && c.t_pol <= 4.0) || !(c.t_opt >= 0.0) || c.n_samples == 0)
        throw Error(ErrorCategory::Calibration, "calibration values out of range");
    return c;
}

CalibrationResult load_calibration(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw Error(ErrorCategory::Io, "cannot open calibration '" + path + "'");
    return read_calibration(is);
}

} // namespace pgnlm
