#include "marvel/cli.hpp"

int main(int argc, char** argv) { return marvel::cli::cli_main(argc, argv); }
