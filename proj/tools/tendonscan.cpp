#include "tendon/cli.hpp"

int main(int argc, char** argv) { return tendon::cli_main(argc, argv); }
