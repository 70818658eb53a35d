#include "ecorank/cli.hpp"

int main(int argc, char** argv) { return ecorank::run_cli(argc, argv); }
