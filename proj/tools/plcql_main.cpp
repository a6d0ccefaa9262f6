#include "plcql/commands.hpp"

int main(int argc, char** argv) { return plcql::run_cli(argc, argv); }
