#include "rcd/cli.hpp"

int main(int argc, char** argv) { return rcd::cli::run(argc, argv); }
