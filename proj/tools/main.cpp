#include <iostream>

#include "rmcov/cli.hpp"

int main(int argc, char** argv) {
    return rmcov::cli::run(argc, argv, std::cout, std::cerr);
}
