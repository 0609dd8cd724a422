#include <iostream>

#include "gsobi_cli.hpp"

int main(int argc, char** argv) { return gsobi::cli::run(argc, argv, std::cout, std::cerr); }
