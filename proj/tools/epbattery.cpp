#include "epbattery/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return epbattery::cli::run_cli(argc, argv, std::cout, std::cerr); }
