#include <iostream>

#include "mlspi_cli.hpp"

int main(int argc, char** argv) { return mlspi::cli::run(argc, argv, std::cout, std::cerr); }
