#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "caplab/corpus.hpp"

namespace caplab {

// Candidate lists aligned with dataset.samples, read from a JSONL file of
// `{"sample_id": str, "candidates": [[int]|str, ...]}` records. Samples
// absent from the file get empty lists; sample ids not present in the
// dataset are an error listing the offenders.
std::vector<std::vector<Phrase>> read_candidates(const std::string& path, const Dataset& dataset);

// Full command-line surface. Returns the process exit code: 0 success,
// 1 usage or validation error, 2 data error, 3 internal invariant violation.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace caplab
