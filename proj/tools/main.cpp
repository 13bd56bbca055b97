#include "mgcn/config.hpp"

int main(int argc, char** argv) { return mgcn::cli_main(argc, argv); }
