#include <iostream>

#include "sage/shell/cli.hpp"

int main(int argc, char** argv) { return sage::shell::run_cli(argc, argv, std::cin, std::cout, std::cerr); }
