#include <iostream>

#include "grnmf/cli.hpp"

int main(int argc, char** argv) { return grnmf::cli::run(argc, argv, std::cout, std::cerr); }
