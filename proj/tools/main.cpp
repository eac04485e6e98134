#include "f2c/cli.hpp"

int main(int argc, char** argv) { return f2c::run_cli(argc, argv); }
