#include "kgec/cli.hpp"

int main(int argc, char** argv) { return kgec::cli::run(argc, argv); }
