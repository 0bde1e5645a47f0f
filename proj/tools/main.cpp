// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include <iostream>

#include "amsinc/cli.hpp"

int main(int argc, char** argv) { return amsinc::cli::run(argc, argv, std::cout, std::cerr); }
