#include "flowplan/cli.hpp"

int main(int argc, char** argv) { return flowplan::cli_main(argc, argv); }
