#include "splinesel/cli.hpp"

int main(int argc, char** argv) { return splinesel::run_cli(argc, argv); }
