#include "gridstealth/cli.hpp"

int main(int argc, char** argv) { return gridstealth::cli::run_command(argc, argv); }
