#include "facepsy/cli.hpp"

int main(int argc, char** argv) { return facepsy::cli::run(argc, argv); }
