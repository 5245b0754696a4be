// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "mulut/cli.hpp"

int main(int argc, char** argv) { return mulut::cli::run(argc, argv); }
