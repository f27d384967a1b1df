#include "kbse/cli.hpp"

int main(int argc, char** argv) { return kbse::cli_main(argc, argv); }
