#include <iostream>

#include "fgsc/cli.hpp"

int main(int argc, char** argv) { return fgsc::run_cli(argc, argv, std::cout, std::cerr); }
