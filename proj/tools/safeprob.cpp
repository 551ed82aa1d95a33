#include <iostream>

#include "safeprob/cli.hpp"

int main(int argc, char** argv) { return safeprob::cli::run_cli(argc, argv, std::cout, std::cerr); }
