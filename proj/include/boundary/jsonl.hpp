#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace boundary {

// Reads a JSONL file, invoking fn(line_number, parsed) per non-empty line.
// Throws ValidationError naming the line on parse failure. When
// tolerate_torn_tail is set, an unparseable final line that is not
// newline-terminated is reported through the return value instead of
// throwing: the byte offset where that line starts (so a resuming writer can
// truncate), or -1 when the file is clean.
long long for_each_jsonl_line(const std::string& path,
                              const std::function<void(std::size_t, const nlohmann::json&)>& fn,
                              bool tolerate_torn_tail = false);

std::vector<nlohmann::json> read_jsonl(const std::string& path);

void append_jsonl_line(std::ostream& out, const nlohmann::json& obj);

}  // namespace boundary
