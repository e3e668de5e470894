#include <iostream>
#include <string>
#include <vector>

#include "equirec/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return equirec::cli::dispatch(args, std::cout, std::cerr);
}
