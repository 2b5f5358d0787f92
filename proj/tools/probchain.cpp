#include "probchain/cli.hpp"

int main(int argc, char** argv) { return probchain::cli::main_entry(argc, argv); }
