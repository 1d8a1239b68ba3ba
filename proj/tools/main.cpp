#include "gridmrf/experiments.hpp"

int main(int argc, char** argv) { return gridmrf::cli_main(argc, argv); }
