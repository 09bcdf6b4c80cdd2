#include "fri/cli.hpp"

int main(int argc, char** argv) { return fri::run_cli(argc, argv); }
