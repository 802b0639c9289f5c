#include <iostream>

#include "actangle/cli.hpp"

int main(int argc, char** argv) { return actangle::run_cli(argc, argv, std::cout, std::cerr); }
