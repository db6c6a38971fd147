#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace stratdesign::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kInfeasible = 4 };

/// Runs one command line (without the program name). Tables and reports go to
/// `out` unless `--out` is given; diagnostics go to `err` as one line each.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Splits a script line into words: whitespace separated, single quotes
/// literal, double quotes and backslash escape. `#` starts a comment outside
/// quotes. Throws InvalidArgument on an unterminated quote.
std::vector<std::string> tokenize(std::string_view line);

/// Replaces `${NAME}` with vars[NAME]; an unknown name throws MissingArgument.
std::string substitute(std::string_view word, const std::map<std::string, std::string>& vars);

/// Quotes a word so tokenize() reads it back unchanged.
std::string quote(std::string_view word);

/// Executes a replay script line by line, stopping at the first failure.
int replay(std::string_view script, const std::map<std::string, std::string>& vars,
           std::ostream& out, std::ostream& err);

}  // namespace stratdesign::cli
