#include <iostream>

#include "cli_app.hpp"

int main(int argc, char** argv) {
    return trimodal::cli::run_command(argc, argv, std::cout, std::cerr);
}
