#include "dloc/cli.hpp"

int main(int argc, char** argv) { return dloc::cli::run(argc, argv); }
