#include "sess/cli_main.hpp"

int main(int argc, char** argv) { return sess::cli::run_cli(argc, argv); }
