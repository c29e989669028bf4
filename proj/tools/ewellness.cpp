#include "ewellness/cli.hpp"

int main(int argc, char** argv) { return ewellness::cli::run(argc, argv); }
