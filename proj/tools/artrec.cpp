#include "artrec/cli.hpp"

int main(int argc, char** argv) { return artrec::run_cli(argc, argv); }
