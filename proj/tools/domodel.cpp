#include <iostream>
#include <string>
#include <vector>

#include "domodel/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return domodel::run_cli(args, std::cout, std::cerr);
}
