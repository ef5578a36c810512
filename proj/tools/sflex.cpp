#include <iostream>

#include "sflex/cli.hpp"

int main(int argc, char** argv) { return sflex::dispatch(argc, argv, std::cout, std::cerr); }
