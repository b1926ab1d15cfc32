#include <iostream>

#include "ttnet/cli.hpp"

int main(int argc, char** argv) { return ttnet::run_cli(argc, argv, std::cout, std::cerr); }
