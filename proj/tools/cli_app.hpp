#pragma once

#include <ostream>

namespace tcfd::cli {

/// Process exit codes.
enum Exit : int {
  kOk = 0,
  kFailure = 1,      // unexpected internal error
  kUsage = 2,        // bad arguments or invalid input data
  kNotFound = 3,     // unknown document, analysis or file
  kBackend = 4,      // LLM / embedding backend unavailable, timed out or rate limited
  kModelOutput = 5,  // model reply unusable, or no question produced a score
  kStorage = 6,      // workspace I/O failure or corrupt index/analysis
  kConflict = 7,     // state conflict (document still indexing, illegal transition)
};

/// Runs the command line; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tcfd::cli
