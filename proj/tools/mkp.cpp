#include "mkp/cli/commands.hpp"

int main(int argc, char** argv) { return mkp::run_cli(argc, argv); }
