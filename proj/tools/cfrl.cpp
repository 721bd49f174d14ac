#include <iostream>

#include "cfrl/harness/harness.hpp"

int main(int argc, char** argv) { return cfrl::harness::run_cli(argc, argv, std::cout, std::cerr); }
