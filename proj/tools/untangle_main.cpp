#include "untangle/cli.hpp"

int main(int argc, char** argv) { return untangle::cli::main(argc, argv); }
