#include "raviucb/harness.hpp"

int main(int argc, char** argv) { return raviucb::cli_main(argc, argv); }
