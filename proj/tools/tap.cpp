#include <iostream>

#include "tap/cli/commands.hpp"

int main(int argc, char** argv) { return tap::cli::run(argc, argv, std::cout, std::cerr); }
