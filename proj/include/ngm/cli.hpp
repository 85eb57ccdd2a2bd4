#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngm/dataset.hpp"

namespace ngm::cli {

struct LoadedCsv {
  Dataset data;
  std::vector<std::string> warnings;
};

// Comma-separated text with a header row. `response` names a column, or is a
// 0-based column index when no header matches it. Every other column becomes a
// feature, in file order.
LoadedCsv parse_csv(std::istream& in, const std::string& response, const std::string& source = "<input>");
LoadedCsv load_csv(const std::string& path, const std::string& response);

// Features first, then the response as the last column. Values are written in
// shortest round-trip form.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::string& path, const Dataset& data);

// Reads the "truth" index array from a truth document written by `simulate`.
IndexSet load_truth(const std::string& path);

void write_json(const std::string& path, const nlohmann::ordered_json& doc);

// Entry point of the `ngm` tool. Returns the process exit status; errors are
// reported on `err` as a one-line JSON record.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ngm::cli
