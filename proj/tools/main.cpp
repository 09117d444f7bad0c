#include "mdd/cli.hpp"

int main(int argc, char** argv) { return mdd::cli::main(argc, argv); }
