#include "waterjudge/cli.hpp"

int main(int argc, char** argv) { return waterjudge::cli::main(argc, argv); }
