#include "mlfdr/cli.hpp"

int main(int argc, char** argv) { return mlfdr::cli_main(argc, argv); }
