#include "sentlabel/cli.hpp"

int main(int argc, char** argv) { return sentlabel::cli::run(argc, argv); }
