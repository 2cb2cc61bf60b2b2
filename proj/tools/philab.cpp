#include "philab/cli.hpp"

int main(int argc, char** argv) { return philab::run_cli(argc, argv); }
