#include "bicert/cli.hpp"

int main(int argc, char** argv) { return bicert::run_cli(argc, argv); }
