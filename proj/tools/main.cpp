#include <gencs/cli.hpp>

int main(int argc, char** argv) { return gencs::cli_main(argc, argv); }
