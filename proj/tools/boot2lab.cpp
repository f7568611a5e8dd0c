// boot2lab.cpp
//
// Command-line entry point; see include/boot2lab/cli.hpp for the interface.

#include <string>
#include <vector>

#include "boot2lab/cli.hpp"

int main(int argc, char** argv) {
    return boot2lab::run_cli(std::vector<std::string>(argv, argv + argc));
}
