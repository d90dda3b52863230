#include "toporag/cli.hpp"

int main(int argc, char** argv) { return toporag::run_cli(argc, argv); }
