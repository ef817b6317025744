#include <iostream>

#include "rffdm/cli.hpp"

int main(int argc, char** argv) { return rffdm::cli::run(argc, argv, std::cout, std::cerr); }
