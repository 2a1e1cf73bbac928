#include <iostream>

#include "netcoop/cli/app.hpp"

int main(int argc, char** argv) { return netcoop::cli::run_cli(argc, argv, std::cout, std::cerr); }
