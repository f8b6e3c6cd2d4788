#include <iostream>
#include <string>
#include <vector>

#include "drin/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return drin::cli::run(args, std::cout, std::cerr);
}
