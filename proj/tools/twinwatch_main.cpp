#include "twinwatch/cli.hpp"

int main(int argc, char** argv) { return twinwatch::cli_main(argc, argv); }
