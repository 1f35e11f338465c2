#include "rtomo/cli.hpp"

int main(int argc, char** argv) { return rtomo::cli::run(argc, argv); }
