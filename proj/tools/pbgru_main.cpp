// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "pbgru/cli/commands.hpp"

int main(int argc, char** argv) { return pbgru::cli::run(argc, argv, std::cout, std::cerr); }
