#include <effdiff/cli.hpp>

int main(int argc, char** argv) { return effdiff::cli_main(argc, argv); }
