#include <iostream>

#include "xfit/cli.hpp"

int main(int argc, char** argv) { return xfit::run_main(argc, argv, std::cout, std::cerr); }
