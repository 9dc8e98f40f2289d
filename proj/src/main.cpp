#include "aucmcf/cli.hpp"

int main(int argc, char** argv) { return aucmcf::run_cli(argc, argv); }
