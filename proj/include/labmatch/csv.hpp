#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "labmatch/inference.hpp"
#include "labmatch/matcher.hpp"
#include "labmatch/model.hpp"

namespace labmatch {

inline constexpr const char* kVersion = "1.0.0";

// 64-bit FNV-1a of a string, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& s);

// First line of every CSV the tools write: "# labmatch <version> config=<hash>".
void write_provenance(std::ostream& os, const std::string& config_hash);

class CsvError : public std::runtime_error {
public:
    CsvError(int line, const std::string& what);
    int line() const { return line_; }

private:
    int line_;
};

// One row per worker: worker,education,matched_type,matched_capital,wage,x1..xd.
// education is the level index (0 low, 1 high).
void write_outcome_csv(std::ostream& os, const MatchingOutcome& out, const Education& H, const Matrix& X,
                       const std::string& config_hash);

// Reads the columns education, matched_type and x1..xd (in any order, other
// columns ignored). Lines starting with '#' are skipped. Errors carry the
// 1-based line number of the offending line.
ObservedData read_outcome_csv(std::istream& is, int n_types);
ObservedData read_outcome_csv(const std::string& path, int n_types);

} // namespace labmatch
