#include "pilotwave/cli.hpp"

int main(int argc, char** argv) { return pilotwave::cmd_dispatch(argc, argv); }
