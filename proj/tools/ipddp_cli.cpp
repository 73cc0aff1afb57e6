#include "ipddp/cli.hpp"

int main(int argc, char** argv) { return ipddp::run_command(argc, argv); }
