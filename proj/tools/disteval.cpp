#include "disteval/cli.hpp"

int main(int argc, char** argv) { return disteval::run_cli(argc, argv); }
