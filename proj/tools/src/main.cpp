#include <socpalm_cli/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return socpalm::cli::cli_main(argc, argv, std::cout, std::cerr); }
