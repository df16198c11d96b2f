#include "qcl/cli/driver.hpp"

int main(int argc, char** argv) { return qcl::cli::main_entry(argc, argv); }
