#include "smallnoise/cli.hpp"

int main(int argc, char** argv) { return smallnoise::cli::run(argc, argv); }
