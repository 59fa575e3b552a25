#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pgnlm::cli {

/// Process exit codes. Failures also print "error[<category>]: <message>"
/// on the error stream.
enum ExitCode : int {
    kOk = 0,
    kMismatch = 1, ///< `compare` found a difference above tolerance
    kUsage = 2,
    kIo = 3,
    kFormat = 4,
    kGeometry = 5,
    kCalibration = 6,
    kData = 7,
};

/// Runs the command line. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace pgnlm::cli
