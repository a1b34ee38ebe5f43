#include "otapfl/cli.h"

int main(int argc, char** argv) { return otapfl::run_cli(argc, argv); }
