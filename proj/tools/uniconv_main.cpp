#include "uniconv/cli.hpp"

int main(int argc, char** argv) { return uniconv::cli::run_cli(argc, argv); }
