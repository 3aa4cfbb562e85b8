#include "mmcell/cli.hpp"

int main(int argc, char** argv) { return mmcell::cli::run(argc, argv); }
