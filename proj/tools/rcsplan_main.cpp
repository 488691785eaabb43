#include "rcsopt/cli.hpp"

int main(int argc, char** argv) { return rcsopt::cli::run(argc, argv); }
