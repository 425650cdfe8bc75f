#include "erp/cli.hpp"

int main(int argc, char** argv) { return erp::cli::dispatch(argc, argv); }
