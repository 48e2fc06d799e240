#include <iostream>
#include <string>
#include <vector>

#include "p2pvc/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return p2pvc::run_cli(args, std::cout, std::cerr);
}
