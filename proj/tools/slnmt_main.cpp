#include "slnmt/cli.hpp"

int main(int argc, char** argv) {
    return slnmt::run_cli(argc, argv);
}
