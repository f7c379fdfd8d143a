#include <iostream>

#include "gpkf/cli.hpp"

int main(int argc, char** argv) { return gpkf::run_cli(argc, argv, std::cout, std::cerr); }
