#include "udil/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return udil::run_cli(argc, argv, std::cout, std::cerr); }
