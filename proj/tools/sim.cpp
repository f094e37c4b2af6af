#include "wdlink/cli.hpp"

int main(int argc, char** argv) { return wdlink::cli::run_cli(argc, argv); }
