#include "fwavg/runner.hpp"

int main(int argc, char** argv) { return fwavg::run_cli(argc, argv); }
