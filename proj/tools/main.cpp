#include <iostream>

#include "coopdet/cli.hpp"

int main(int argc, char** argv) { return coopdet::run_cli(argc, argv, std::cout, std::cerr); }
