#include "commands.hpp"

int main(int argc, char** argv) { return groundal::cli::run_cli(argc, argv); }
