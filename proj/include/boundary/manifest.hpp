#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace boundary {

struct EndpointConfig;

// One line of a dataset manifest after the header.
struct ManifestEntry {
  std::string item_id;
  std::string image_path;  // relative to the manifest file's directory
  int label_index = 0;
  std::optional<std::string> modality;  // per-item override of the header value
};

struct DatasetManifest {
  std::string task_id;
  std::string modality;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> items;
  std::string base_dir;  // directory of the manifest file; not serialized

  int class_count() const { return static_cast<int>(class_names.size()); }
};

struct McqOption {
  char letter = 'A';
  std::string text;
};

struct McqItem {
  std::string item_id;
  std::string task_id;
  std::string image_path;
  std::string question;
  std::vector<McqOption> options;
  char correct_letter = 'A';
  std::string modality;
  std::uint64_t shuffle_seed_used = 0;
};

struct ModalityTag {
  std::string item_id;
  std::string predicted_modality;
  std::string raw_judge_output;
};

struct LoadManifestOptions {
  bool check_images = false;
};

DatasetManifest load_manifest(const std::string& path, const LoadManifestOptions& opts = {});

// Inverse of load_manifest, same header-plus-JSONL layout.
std::string serialize_manifest(const DatasetManifest& manifest);

inline constexpr const char* kDefaultQuestion = "Which option best describes this image?";

struct ConvertOptions {
  bool option_shuffle = false;
  std::uint64_t seed = 0;
  std::string question = kDefaultQuestion;
};

std::vector<McqItem> convert_to_mcq(const DatasetManifest& manifest, const ConvertOptions& opts);

enum class GroupBy { kModality, kLabel };

// Selects a per-group-balanced subset. Groups with too few items keep all
// they have and the shortfall is redistributed round-robin (lexicographic
// group order) over groups that still have supply. Items grouped as "none"
// are dropped first when grouping by modality.
std::vector<McqItem> balanced_subset(const std::vector<McqItem>& items, int total_n,
                                     std::uint64_t seed, GroupBy group_by);

std::vector<std::string> default_modality_vocabulary();

struct TagOptions {
  std::vector<std::string> vocabulary = default_modality_vocabulary();
  bool embed_item_marker = true;
};

// Asks a judge endpoint for the imaging modality of every item. Endpoint
// failures degrade to "none" tags; this never throws on network errors.
std::vector<ModalityTag> tag_modalities(const std::vector<McqItem>& items,
                                        const EndpointConfig& judge, const TagOptions& opts = {});

// The judge prompt used by tag_modalities, exposed so runs can record it.
std::string modality_judge_prompt(const McqItem& item, const std::vector<std::string>& vocabulary);

// JSONL (de)serialization for item and tag files.
std::string mcq_item_to_json_line(const McqItem& item);
McqItem mcq_item_from_json_line(const std::string& line);
std::vector<McqItem> read_mcq_items(const std::string& path);
void write_mcq_items(const std::string& path, const std::vector<McqItem>& items);
std::vector<ModalityTag> read_modality_tags(const std::string& path);
void write_modality_tags(const std::string& path, const std::vector<ModalityTag>& tags);

// Replaces item modalities with predicted tags (items without a tag keep
// their current value).
void apply_modality_tags(std::vector<McqItem>& items, const std::vector<ModalityTag>& tags);

}  // namespace boundary
