#include <iostream>

#include "omnisal/cli.hpp"

int main(int argc, char** argv) { return omnisal::cli::run(argc, argv, std::cout, std::cerr); }
