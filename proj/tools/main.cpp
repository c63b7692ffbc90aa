#include "vocl/cli/app.hpp"

int main(int argc, char** argv) { return vocl::cli::dispatch(argc, argv); }
