#include "metastab/experiments.hpp"

int main(int argc, char** argv) { return metastab::experiments::run_cli(argc, argv); }
