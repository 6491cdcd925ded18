#include <iostream>
#include <string>
#include <vector>

#include "sensegram/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return sensegram::cli::run(args, std::cout, std::cerr);
}
