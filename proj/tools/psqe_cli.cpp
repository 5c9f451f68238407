#include <iostream>
#include <string>
#include <vector>

#include "psqe/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return psqe::cli(args, std::cout, std::cerr);
}
