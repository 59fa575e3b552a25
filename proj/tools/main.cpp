#include <iostream>
#include <string>
#include <vector>

#include "pgnlm/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return pgnlm::cli::run(args, std::cout, std::cerr);
}
