#include "boundary/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "boundary/common.hpp"
#include "boundary/inference.hpp"
#include "boundary/jsonl.hpp"
#include "boundary/markers.hpp"

namespace boundary {

namespace {

using nlohmann::json;

std::string require_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ValidationError(where + ": missing or non-string \"" + key + "\"");
  }
  return j.at(key).get<std::string>();
}

json header_json(const DatasetManifest& m) {
  json j;
  j["task_id"] = m.task_id;
  j["modality"] = m.modality;
  j["class_names"] = m.class_names;
  return j;
}

json entry_json(const ManifestEntry& e) {
  json j;
  j["item_id"] = e.item_id;
  j["image_path"] = e.image_path;
  j["label_index"] = e.label_index;
  if (e.modality) j["modality"] = *e.modality;
  return j;
}

void validate_header(const DatasetManifest& m, const std::string& where) {
  if (m.task_id.empty()) throw ValidationError(where + ": empty task_id");
  if (m.class_names.size() < 2) {
    throw ValidationError(where + ": need at least 2 class_names, got " +
                          std::to_string(m.class_names.size()));
  }
  std::set<std::string> seen;
  for (const auto& name : m.class_names) {
    if (name.empty()) throw ValidationError(where + ": empty class name");
    if (!seen.insert(name).second) {
      throw ValidationError(where + ": duplicate class name \"" + name + "\"");
    }
  }
}

}  // namespace

DatasetManifest load_manifest(const std::string& path, const LoadManifestOptions& opts) {
  DatasetManifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();
  std::set<std::string> ids;
  bool have_header = false;

  for_each_jsonl_line(path, [&](std::size_t lineno, const json& j) {
    std::string where = path + ":" + std::to_string(lineno);
    if (!have_header) {
      m.task_id = require_string(j, "task_id", where);
      m.modality = require_string(j, "modality", where);
      if (!j.contains("class_names") || !j.at("class_names").is_array()) {
        throw ValidationError(where + ": missing or non-array \"class_names\"");
      }
      for (const auto& name : j.at("class_names")) {
        if (!name.is_string()) throw ValidationError(where + ": non-string class name");
        m.class_names.push_back(name.get<std::string>());
      }
      validate_header(m, where);
      have_header = true;
      return;
    }

    ManifestEntry e;
    e.item_id = require_string(j, "item_id", where);
    e.image_path = require_string(j, "image_path", where);
    if (!j.contains("label_index") || !j.at("label_index").is_number_integer()) {
      throw ValidationError(where + ": missing or non-integer \"label_index\" for item \"" +
                            e.item_id + "\"");
    }
    e.label_index = j.at("label_index").get<int>();
    if (j.contains("modality")) e.modality = require_string(j, "modality", where);

    if (e.label_index < 0 || e.label_index >= m.class_count()) {
      throw ValidationError(where + ": label_index " + std::to_string(e.label_index) +
                            " out of range [0, " + std::to_string(m.class_count()) +
                            ") for item \"" + e.item_id + "\"");
    }
    if (!ids.insert(e.item_id).second) {
      throw ValidationError(where + ": duplicate item_id \"" + e.item_id + "\"");
    }
    m.items.push_back(std::move(e));
  });

  if (!have_header) throw ValidationError(path + ": empty manifest, header line required");

  if (opts.check_images) {
    for (const auto& e : m.items) {
      auto full = m.base_dir.empty() ? std::filesystem::path(e.image_path)
                                     : std::filesystem::path(m.base_dir) / e.image_path;
      if (!std::filesystem::is_regular_file(full)) {
        throw ValidationError(path + ": image not found for item \"" + e.item_id + "\": " +
                              full.string());
      }
    }
  }
  return m;
}

std::string serialize_manifest(const DatasetManifest& m) {
  validate_header(m, "manifest");
  std::string out = header_json(m).dump() + "\n";
  for (const auto& e : m.items) out += entry_json(e).dump() + "\n";
  return out;
}

std::vector<McqItem> convert_to_mcq(const DatasetManifest& manifest, const ConvertOptions& opts) {
  validate_header(manifest, "manifest");
  if (manifest.class_count() > 26) {
    throw ValidationError("manifest: " + std::to_string(manifest.class_count()) +
                          " classes exceed the 26 option letters");
  }
  if (opts.question.empty()) throw ValidationError("convert: empty question");

  std::vector<McqItem> items;
  items.reserve(manifest.items.size());
  for (const auto& e : manifest.items) {
    McqItem item;
    item.item_id = e.item_id;
    item.task_id = manifest.task_id;
    item.image_path = manifest.base_dir.empty()
                          ? e.image_path
                          : (std::filesystem::path(manifest.base_dir) / e.image_path).string();
    item.question = opts.question;
    item.modality = e.modality.value_or(manifest.modality);

    std::vector<int> order(manifest.class_names.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    if (opts.option_shuffle) {
      item.shuffle_seed_used = mix_seed(opts.seed, fnv1a64(e.item_id));
      std::uint64_t state = item.shuffle_seed_used;
      auto rng = [&state] { return state = splitmix64(state); };
      portable_shuffle(order, rng);
    }
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      McqOption opt;
      opt.letter = static_cast<char>('A' + pos);
      opt.text = manifest.class_names[order[pos]];
      if (order[pos] == e.label_index) item.correct_letter = opt.letter;
      item.options.push_back(std::move(opt));
    }
    items.push_back(std::move(item));
  }
  return items;
}

namespace {

std::string group_key(const McqItem& item, GroupBy group_by) {
  if (group_by == GroupBy::kModality) return item.modality;
  for (const auto& opt : item.options) {
    if (opt.letter == item.correct_letter) return opt.text;
  }
  throw ValidationError("item \"" + item.item_id + "\": correct_letter not among its options");
}

}  // namespace

std::vector<McqItem> balanced_subset(const std::vector<McqItem>& items, int total_n,
                                     std::uint64_t seed, GroupBy group_by) {
  if (total_n <= 0) throw ValidationError("balance: total_n must be positive");

  std::map<std::string, std::vector<const McqItem*>> groups;
  for (const auto& item : items) {
    auto key = group_key(item, group_by);
    if (group_by == GroupBy::kModality && key == "none") continue;
    groups[key].push_back(&item);
  }
  if (groups.empty()) throw ValidationError("balance: no groupable items");

  int available = 0;
  std::ostringstream supply;
  for (const auto& [name, members] : groups) {
    available += static_cast<int>(members.size());
    if (supply.tellp() > 0) supply << ", ";
    supply << name << "=" << members.size();
  }
  if (total_n < static_cast<int>(groups.size())) {
    throw ValidationError("balance: total_n " + std::to_string(total_n) + " below the " +
                          std::to_string(groups.size()) + " groups (" + supply.str() + ")");
  }
  if (total_n > available) {
    throw ValidationError("balance: total_n " + std::to_string(total_n) + " exceeds the " +
                          std::to_string(available) + " available items (" + supply.str() + ")");
  }

  // floor quota plus one for the first remainder groups, capped by supply
  int g = static_cast<int>(groups.size());
  std::map<std::string, int> take;
  int idx = 0;
  int assigned = 0;
  for (const auto& [name, members] : groups) {
    int quota = total_n / g + (idx < total_n % g ? 1 : 0);
    take[name] = std::min<int>(quota, static_cast<int>(members.size()));
    assigned += take[name];
    ++idx;
  }
  // hand the shortfall out one slot at a time, lexicographic round-robin
  while (assigned < total_n) {
    for (auto& [name, members] : groups) {
      if (assigned >= total_n) break;
      if (take[name] < static_cast<int>(members.size())) {
        ++take[name];
        ++assigned;
      }
    }
  }

  std::vector<McqItem> out;
  out.reserve(total_n);
  for (auto& [name, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const McqItem* a, const McqItem* b) { return a->item_id < b->item_id; });
    std::uint64_t state = mix_seed(seed, fnv1a64(name));
    auto rng = [&state] { return state = splitmix64(state); };
    portable_shuffle(members, rng);
    members.resize(take[name]);
    std::sort(members.begin(), members.end(),
              [](const McqItem* a, const McqItem* b) { return a->item_id < b->item_id; });
    for (const auto* m : members) out.push_back(*m);
  }
  return out;
}

std::vector<std::string> default_modality_vocabulary() {
  return {"mri", "ct", "ultrasound", "x-ray", "microscopy", "dermatology", "oct", "none"};
}

std::string modality_judge_prompt(const McqItem& item, const std::vector<std::string>& vocabulary) {
  (void)item;  // one shared prompt; the image rides alongside it
  std::string words;
  for (const auto& v : vocabulary) {
    if (!words.empty()) words += ", ";
    words += v;
  }
  return std::string("You are ") + kModalityRouteMarker +
         " of the attached medical image. Reply with exactly one word from this list: " + words +
         ". If the modality is unclear or not listed, reply none.";
}

std::vector<ModalityTag> tag_modalities(const std::vector<McqItem>& items,
                                        const EndpointConfig& judge, const TagOptions& opts) {
  judge.validate();
  if (opts.vocabulary.empty()) throw ValidationError("tag-modality: empty vocabulary");

  std::vector<std::string> lowered;
  lowered.reserve(opts.vocabulary.size());
  for (const auto& v : opts.vocabulary) lowered.push_back(to_lower(v));

  PromptTemplate tmpl;
  tmpl.embed_item_marker = opts.embed_item_marker;
  auto body_for = [&](std::size_t i) {
    auto body = render_prompt(items[i], tmpl, judge);
    std::string text = modality_judge_prompt(items[i], opts.vocabulary);
    if (opts.embed_item_marker) text = item_marker(items[i].item_id) + "\n" + text;
    body["messages"][0]["content"][1]["text"] = text;
    return body;
  };
  auto results = post_chat_batch(items.size(), body_for, judge);

  std::vector<ModalityTag> tags;
  tags.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    ModalityTag tag;
    tag.item_id = items[i].item_id;
    if (results[i].error) {
      tag.predicted_modality = "none";
      tag.raw_judge_output = "endpoint error: " + *results[i].error;
    } else {
      tag.raw_judge_output = results[i].text;
      auto normalized = to_lower(trim(results[i].text));
      tag.predicted_modality = "none";
      for (const auto& v : lowered) {
        if (normalized == v) {
          tag.predicted_modality = v;
          break;
        }
      }
    }
    tags.push_back(std::move(tag));
  }
  return tags;
}

std::string mcq_item_to_json_line(const McqItem& item) {
  json j;
  j["item_id"] = item.item_id;
  j["task_id"] = item.task_id;
  j["image_path"] = item.image_path;
  j["question"] = item.question;
  json opts = json::array();
  for (const auto& o : item.options) {
    opts.push_back({{"letter", std::string(1, o.letter)}, {"text", o.text}});
  }
  j["options"] = std::move(opts);
  j["correct_letter"] = std::string(1, item.correct_letter);
  j["modality"] = item.modality;
  j["shuffle_seed_used"] = item.shuffle_seed_used;
  return j.dump();
}

namespace {

char single_letter(const json& j, const char* key, const std::string& where) {
  auto s = require_string(j, key, where);
  if (s.size() != 1 || s[0] < 'A' || s[0] > 'Z') {
    throw ValidationError(where + ": \"" + key + "\" must be one letter A-Z, got \"" + s + "\"");
  }
  return s[0];
}

McqItem item_from_json(const json& j, const std::string& where) {
  McqItem item;
  item.item_id = require_string(j, "item_id", where);
  item.task_id = require_string(j, "task_id", where);
  item.image_path = require_string(j, "image_path", where);
  item.question = require_string(j, "question", where);
  if (!j.contains("options") || !j.at("options").is_array() || j.at("options").empty()) {
    throw ValidationError(where + ": missing or empty \"options\"");
  }
  for (const auto& o : j.at("options")) {
    McqOption opt;
    opt.letter = single_letter(o, "letter", where);
    opt.text = require_string(o, "text", where);
    item.options.push_back(std::move(opt));
  }
  item.correct_letter = single_letter(j, "correct_letter", where);
  item.modality = require_string(j, "modality", where);
  if (j.contains("shuffle_seed_used")) {
    item.shuffle_seed_used = j.at("shuffle_seed_used").get<std::uint64_t>();
  }
  bool found = false;
  for (const auto& o : item.options) found = found || o.letter == item.correct_letter;
  if (!found) {
    throw ValidationError(where + ": correct_letter \"" + std::string(1, item.correct_letter) +
                          "\" not among the options of item \"" + item.item_id + "\"");
  }
  return item;
}

}  // namespace

McqItem mcq_item_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed item line: ") + e.what());
  }
  return item_from_json(j, "item");
}

std::vector<McqItem> read_mcq_items(const std::string& path) {
  std::vector<McqItem> items;
  for_each_jsonl_line(path, [&](std::size_t lineno, const json& j) {
    items.push_back(item_from_json(j, path + ":" + std::to_string(lineno)));
  });
  if (items.empty()) throw ValidationError(path + ": no items");
  return items;
}

void write_mcq_items(const std::string& path, const std::vector<McqItem>& items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  for (const auto& item : items) out << mcq_item_to_json_line(item) << "\n";
}

std::vector<ModalityTag> read_modality_tags(const std::string& path) {
  std::vector<ModalityTag> tags;
  for_each_jsonl_line(path, [&](std::size_t lineno, const json& j) {
    std::string where = path + ":" + std::to_string(lineno);
    ModalityTag tag;
    tag.item_id = require_string(j, "item_id", where);
    tag.predicted_modality = require_string(j, "predicted_modality", where);
    tag.raw_judge_output = require_string(j, "raw_judge_output", where);
    tags.push_back(std::move(tag));
  });
  return tags;
}

void write_modality_tags(const std::string& path, const std::vector<ModalityTag>& tags) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  for (const auto& tag : tags) {
    json j;
    j["item_id"] = tag.item_id;
    j["predicted_modality"] = tag.predicted_modality;
    j["raw_judge_output"] = tag.raw_judge_output;
    out << j.dump() << "\n";
  }
}

void apply_modality_tags(std::vector<McqItem>& items, const std::vector<ModalityTag>& tags) {
  std::map<std::string, const ModalityTag*> by_id;
  for (const auto& tag : tags) by_id[tag.item_id] = &tag;
  for (auto& item : items) {
    auto it = by_id.find(item.item_id);
    if (it != by_id.end()) item.modality = it->second->predicted_modality;
  }
}

}  // namespace boundary
