#include <vector>

#include "hner/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hner::run_cli(args);
}
