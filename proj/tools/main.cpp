#include <iostream>
#include <string>
#include <vector>

#include "discloc/cli/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return discloc::cli::run_cli(args, std::cout, std::cerr);
}
