#include "gradmm/cli.hpp"

int main(int argc, char** argv) { return gradmm::cli::run_cli(argc, argv); }
