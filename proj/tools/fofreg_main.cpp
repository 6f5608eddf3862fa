#include "fofreg/cli.hpp"

int main(int argc, char** argv) { return fofreg::cli::run(argc, argv); }
