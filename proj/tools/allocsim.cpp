#include "allocsim/cli.hpp"

int main(int argc, char** argv) { return allocsim::run_cli(argc, argv); }
