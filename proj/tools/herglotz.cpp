#include "herglotz/cli/commands.hpp"

int main(int argc, char** argv) { return herglotz::cli::run_main(argc, argv); }
