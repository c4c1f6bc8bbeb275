#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "boundary/manifest.hpp"

namespace boundary::testutil {

// 1x1 grayscale PNG, 67 bytes.
inline std::string tiny_png() {
  static const unsigned char bytes[] = {
      0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
      0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00,
      0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78,
      0xda, 0x63, 0x68, 0x00, 0x00, 0x00, 0x82, 0x00, 0x81, 0xda, 0x45, 0x08, 0x3b, 0x00,
      0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
  return std::string(reinterpret_cast<const char*>(bytes), sizeof(bytes));
}

class TempDir {
 public:
  explicit TempDir(const std::string& hint = "boundary_test") {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    path_ = base / (hint + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string write_tiny_png(const TempDir& dir, const std::string& name = "img.png") {
  auto p = dir.file(name);
  write_text_file(p, tiny_png());
  return p;
}

// A ready-to-use MCQ item pointing at a real (tiny) image file.
inline McqItem make_item(const std::string& image_path, const std::string& item_id,
                         char correct = 'B', int n_options = 2,
                         const std::string& task = "demo", const std::string& modality = "none") {
  McqItem item;
  item.item_id = item_id;
  item.task_id = task;
  item.image_path = image_path;
  item.question = "Which option best describes this image?";
  for (int i = 0; i < n_options; ++i) {
    item.options.push_back({static_cast<char>('A' + i), "class" + std::to_string(i)});
  }
  item.correct_letter = correct;
  item.modality = modality;
  return item;
}

inline std::vector<McqItem> make_items(const TempDir& dir, int count, char correct = 'B',
                                       int n_options = 2, const std::string& task = "demo") {
  auto png = write_tiny_png(dir);
  std::vector<McqItem> items;
  items.reserve(count);
  for (int i = 0; i < count; ++i) {
    items.push_back(make_item(png, "item" + std::to_string(i), correct, n_options, task));
  }
  return items;
}

}  // namespace boundary::testutil
