#include "holokit/cli.hpp"

int main(int argc, char** argv) { return holokit::cli::main(argc, argv); }
