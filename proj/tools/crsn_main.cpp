#include "crsn/harness.hpp"

int main(int argc, char** argv) { return crsn::cli_main(argc, argv); }
