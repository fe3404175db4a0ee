#include "reactor/cli.hpp"

int main(int argc, char** argv) { return reactor::run_cli(argc, argv); }
