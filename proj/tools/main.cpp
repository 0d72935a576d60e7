#include "agb/cli.hpp"

int main(int argc, char** argv) { return agb::cli::run_cli(argc, argv); }
