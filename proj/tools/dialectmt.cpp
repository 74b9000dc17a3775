#include "dialectmt/cli.hpp"

int main(int argc, char** argv) { return dialectmt::run_cli(argc, argv); }
