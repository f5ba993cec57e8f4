#include "dcpose/cli.hpp"

int main(int argc, char** argv) { return dcpose::run(argc, argv); }
