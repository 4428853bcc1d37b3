#include "quantsp/cli.hpp"

int main(int argc, char** argv) { return quantsp::cli::run(argc, argv); }
