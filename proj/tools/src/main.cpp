#include <iostream>

#include "stepdeconv_cli/cli.hpp"

int main(int argc, char** argv) { return stepdeconv::cli::run_cli(argc, argv, std::cout, std::cerr); }
