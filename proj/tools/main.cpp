#include <iostream>

#include "naive_mv/cli.hpp"

int main(int argc, char** argv) { return naive_mv::run_cli(argc, argv, std::cout, std::cerr); }
