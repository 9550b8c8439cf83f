#include <iostream>

#include "sintent/cli.hpp"

int main(int argc, char** argv) { return sintent::run_cli(argc, argv, std::cin, std::cout, std::cerr); }
