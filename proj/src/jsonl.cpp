#include "boundary/jsonl.hpp"

#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "boundary/common.hpp"

namespace boundary {

long long for_each_jsonl_line(const std::string& path,
                              const std::function<void(std::size_t, const nlohmann::json&)>& fn,
                              bool tolerate_torn_tail) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::string line;
  std::size_t lineno = 0;
  long long offset = 0;
  while (true) {
    long long line_start = offset;
    if (!std::getline(in, line)) break;
    offset += static_cast<long long>(line.size());
    bool had_newline = !in.eof();
    if (had_newline) ++offset;
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded()) {
      if (tolerate_torn_tail && !had_newline) return line_start;
      throw ValidationError(path + ":" + std::to_string(lineno) + ": malformed JSON line");
    }
    fn(lineno, obj);
  }
  return -1;
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::vector<nlohmann::json> out;
  for_each_jsonl_line(path, [&](std::size_t, const nlohmann::json& obj) { out.push_back(obj); });
  return out;
}

void append_jsonl_line(std::ostream& out, const nlohmann::json& obj) {
  out << obj.dump() << '\n';
}

}  // namespace boundary
