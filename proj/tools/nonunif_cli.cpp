#include "nonunif/cli.hpp"

int main(int argc, char** argv) { return nonunif::run_cli(argc, argv); }
