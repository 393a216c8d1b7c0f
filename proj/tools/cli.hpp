#pragma once

#include <iosfwd>

namespace imdcf::cli {

// Runs the imdcf command line. argv[0] is the program name. Returns the
// process exit code (see ExitCode).
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace imdcf::cli
