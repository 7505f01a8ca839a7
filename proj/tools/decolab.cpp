#include "decolab/cli.hpp"

int main(int argc, char** argv) { return decolab::cli::run(argc, argv); }
