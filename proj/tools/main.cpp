#include "latnet/cli.hpp"

int main(int argc, char** argv) { return latnet::run_cli(argc, argv); }
