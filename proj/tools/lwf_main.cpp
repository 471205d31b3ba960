#include "lwf/cli.hpp"

int main(int argc, char** argv) { return lwf::run_cli(argc, argv); }
