#include <iostream>

#include "sploc/cli.hpp"

int main(int argc, char** argv) { return sploc::run_cli(argc, argv, std::cout, std::cerr); }
