#include "pfp/cli.hpp"

int main(int argc, char** argv) { return pfp::main_entry(argc, argv); }
