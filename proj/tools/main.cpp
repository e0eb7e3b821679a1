#include <iostream>
#include <string>
#include <vector>

#include "semloc/cli.hpp"

int main(int argc, char** argv) {
    return semloc::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
