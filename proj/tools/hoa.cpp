#include "hoa/cli.hpp"

int main(int argc, char** argv) { return hoa::cli::run(argc, argv); }
