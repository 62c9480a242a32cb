#include "opicl/cli/cli.hpp"

int main(int argc, char** argv) { return opicl::cli::run_cli(argc, argv); }
