#include "boundary/manifest.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <doctest.h>

#include "boundary/common.hpp"
#include "test_util.hpp"

using namespace boundary;

namespace {

std::string manifest_text(const std::string& task, const std::string& modality, int n_classes,
                          int n_items, bool per_item_modality = false) {
  std::string out = R"({"task_id": ")" + task + R"(", "modality": ")" + modality +
                    R"(", "class_names": [)";
  for (int c = 0; c < n_classes; ++c) {
    if (c) out += ", ";
    out += "\"class" + std::to_string(c) + "\"";
  }
  out += "]}\n";
  for (int i = 0; i < n_items; ++i) {
    out += R"({"item_id": "item)" + std::to_string(i) + R"(", "image_path": "img.png", )" +
           R"("label_index": )" + std::to_string(i % n_classes);
    if (per_item_modality && i == 0) out += R"(, "modality": "ct")";
    out += "}\n";
  }
  return out;
}

DatasetManifest load_from_text(const testutil::TempDir& dir, const std::string& text,
                               const LoadManifestOptions& opts = {}) {
  auto path = dir.file("manifest.jsonl");
  testutil::write_text_file(path, text);
  return load_manifest(path, opts);
}

// Slow reference for the quota rule: start from the floor/remainder split,
// then hand out one slot at a time in lexicographic order wherever supply
// remains.
std::map<std::string, int> reference_quotas(const std::map<std::string, int>& sizes, int total_n) {
  std::map<std::string, int> take;
  int g = static_cast<int>(sizes.size());
  int base = total_n / g;
  int rem = total_n % g;
  int idx = 0;
  for (const auto& [name, size] : sizes) {
    int quota = base + (idx < rem ? 1 : 0);
    take[name] = std::min(quota, size);
    ++idx;
  }
  auto assigned = [&] {
    int s = 0;
    for (auto& [_, t] : take) s += t;
    return s;
  };
  while (assigned() < total_n) {
    bool progressed = false;
    for (const auto& [name, size] : sizes) {
      if (assigned() >= total_n) break;
      if (take[name] < size) {
        ++take[name];
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return take;
}

}  // namespace

TEST_CASE("load_manifest accepts a valid 3-class manifest") {
  testutil::TempDir dir;
  auto m = load_from_text(dir, manifest_text("demo", "radiology", 3, 10));
  CHECK(m.task_id == "demo");
  CHECK(m.class_count() == 3);
  CHECK(m.items.size() == 10);
  CHECK(m.modality == "radiology");
}

TEST_CASE("load_manifest rejects out-of-range labels naming the item") {
  testutil::TempDir dir;
  std::string text = manifest_text("demo", "none", 3, 1);
  text += R"({"item_id": "bad", "image_path": "img.png", "label_index": 3})"
          "\n";
  try {
    load_from_text(dir, text);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("label") != std::string::npos);
    CHECK(msg.find("bad") != std::string::npos);
  }
}

TEST_CASE("load_manifest rejects duplicates, malformed lines, bad headers") {
  testutil::TempDir dir;

  std::string dup = manifest_text("demo", "none", 2, 1);
  dup += R"({"item_id": "item0", "image_path": "img.png", "label_index": 0})"
         "\n";
  CHECK_THROWS_AS(load_from_text(dir, dup), ValidationError);

  std::string malformed = manifest_text("demo", "none", 2, 1) + "{not json\n";
  try {
    load_from_text(dir, malformed);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);  // line number
  }

  CHECK_THROWS_AS(load_from_text(dir, R"({"task_id": "t", "modality": "none", "class_names": ["only"]})"
                                      "\n"),
                  ValidationError);  // C < 2
  CHECK_THROWS_AS(load_from_text(dir, R"({"task_id": "t", "modality": "none", "class_names": ["a", "a"]})"
                                      "\n"),
                  ValidationError);  // duplicate class names
}

TEST_CASE("load_manifest image check") {
  testutil::TempDir dir;
  LoadManifestOptions check;
  check.check_images = true;
  CHECK_THROWS_AS(load_from_text(dir, manifest_text("demo", "none", 2, 2), check),
                  ValidationError);
  testutil::write_tiny_png(dir);  // provides img.png next to the manifest
  CHECK_NOTHROW(load_from_text(dir, manifest_text("demo", "none", 2, 2), check));
}

TEST_CASE("items inherit the header modality unless overridden") {
  testutil::TempDir dir;
  auto m = load_from_text(dir, manifest_text("demo", "radiology", 2, 4, true));
  auto items = convert_to_mcq(m, {});
  REQUIRE(items.size() == 4);
  CHECK(items[0].modality == "ct");  // per-item override
  for (int i = 1; i < 4; ++i) CHECK(items[i].modality == "radiology");
}

TEST_CASE("manifest round-trip is semantically lossless (property)") {
  std::mt19937_64 rng(20260801);
  for (int trial = 0; trial < 30; ++trial) {
    DatasetManifest m;
    m.task_id = "task" + std::to_string(rng() % 100);
    m.modality = (rng() % 2) ? "radiology" : "none";
    int n_classes = 2 + int(rng() % 8);
    for (int c = 0; c < n_classes; ++c) m.class_names.push_back("cls_" + std::to_string(c));
    int n_items = 1 + int(rng() % 40);
    for (int i = 0; i < n_items; ++i) {
      ManifestEntry e;
      e.item_id = "it" + std::to_string(i);
      e.image_path = "images/" + std::to_string(rng() % 10) + ".png";
      e.label_index = int(rng() % n_classes);
      if (rng() % 4 == 0) e.modality = "ct";
      m.items.push_back(e);
    }

    testutil::TempDir dir;
    auto path = dir.file("m.jsonl");
    testutil::write_text_file(path, serialize_manifest(m));
    auto loaded = load_manifest(path);

    CHECK(loaded.task_id == m.task_id);
    CHECK(loaded.modality == m.modality);
    CHECK(loaded.class_names == m.class_names);
    REQUIRE(loaded.items.size() == m.items.size());
    for (std::size_t i = 0; i < m.items.size(); ++i) {
      CHECK(loaded.items[i].item_id == m.items[i].item_id);
      CHECK(loaded.items[i].image_path == m.items[i].image_path);
      CHECK(loaded.items[i].label_index == m.items[i].label_index);
      CHECK(loaded.items[i].modality == m.items[i].modality);
    }
    // Serializing the loaded manifest reproduces the bytes too.
    CHECK(serialize_manifest(loaded) == serialize_manifest(m));
  }
}

TEST_CASE("convert_to_mcq identity order when shuffle off") {
  testutil::TempDir dir;
  auto m = load_from_text(dir, manifest_text("demo", "none", 2, 3));
  auto items = convert_to_mcq(m, {});
  REQUIRE(items.size() == 3);
  // entry 1 has label_index 1
  CHECK(items[1].options.size() == 2);
  CHECK(items[1].options[0].letter == 'A');
  CHECK(items[1].options[0].text == "class0");
  CHECK(items[1].options[1].letter == 'B');
  CHECK(items[1].options[1].text == "class1");
  CHECK(items[1].correct_letter == 'B');
  CHECK(items[0].correct_letter == 'A');
  CHECK(items[0].question == std::string(kDefaultQuestion));
}

TEST_CASE("convert_to_mcq is deterministic given the seed") {
  testutil::TempDir dir;
  auto m = load_from_text(dir, manifest_text("demo", "none", 5, 20));
  ConvertOptions opts;
  opts.option_shuffle = true;
  opts.seed = 99;
  auto a = convert_to_mcq(m, opts);
  auto b = convert_to_mcq(m, opts);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(mcq_item_to_json_line(a[i]) == mcq_item_to_json_line(b[i]));  // byte-identical
  }
}

TEST_CASE("convert_to_mcq preserves the answer under any permutation (property)") {
  testutil::TempDir dir;
  auto m = load_from_text(dir, manifest_text("demo", "none", 7, 50));
  ConvertOptions opts;
  opts.option_shuffle = true;
  opts.seed = 5;
  auto items = convert_to_mcq(m, opts);
  REQUIRE(items.size() == 50);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    int label = int(i) % 7;
    auto pos = std::find_if(it.options.begin(), it.options.end(),
                            [&](const McqOption& o) { return o.letter == it.correct_letter; });
    REQUIRE(pos != it.options.end());
    CHECK(pos->text == m.class_names[label]);
    // options are consecutive letters starting at A and cover all classes
    std::set<std::string> texts;
    for (std::size_t j = 0; j < it.options.size(); ++j) {
      CHECK(it.options[j].letter == char('A' + j));
      texts.insert(it.options[j].text);
    }
    CHECK(texts.size() == 7);
  }
}

TEST_CASE("convert_to_mcq shuffled positions are uniform (chi-squared)") {
  testutil::TempDir dir;
  const int C = 9;
  const int N = 1000;
  auto m = load_from_text(dir, manifest_text("demo", "none", C, N));
  ConvertOptions opts;
  opts.option_shuffle = true;
  opts.seed = 20260817;
  auto items = convert_to_mcq(m, opts);
  std::vector<int> counts(C, 0);
  for (const auto& it : items) ++counts[it.correct_letter - 'A'];
  double expected = double(N) / C;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // df = 8; p > 0.01 means the statistic stays below the 0.99 quantile 20.090.
  CHECK(chi2 < 20.090);
}

TEST_CASE("convert_to_mcq rejects more than 26 classes") {
  DatasetManifest m;
  m.task_id = "big";
  m.modality = "none";
  for (int c = 0; c < 27; ++c) m.class_names.push_back("c" + std::to_string(c));
  ManifestEntry e;
  e.item_id = "x";
  e.image_path = "x.png";
  e.label_index = 0;
  m.items.push_back(e);
  CHECK_THROWS_AS(convert_to_mcq(m, {}), ValidationError);
}

namespace {

std::vector<McqItem> grouped_items(const std::map<std::string, int>& sizes) {
  std::vector<McqItem> items;
  int serial = 0;
  for (const auto& [modality, count] : sizes) {
    for (int i = 0; i < count; ++i) {
      McqItem it;
      char buf[16];
      std::snprintf(buf, sizeof(buf), "it%04d", serial++);
      it.item_id = buf;
      it.task_id = "t";
      it.image_path = "x.png";
      it.question = "q";
      it.options = {{'A', "a"}, {'B', "b"}};
      it.correct_letter = 'A';
      it.modality = modality;
      items.push_back(it);
    }
  }
  return items;
}

std::map<std::string, int> count_by_modality(const std::vector<McqItem>& items) {
  std::map<std::string, int> counts;
  for (const auto& it : items) ++counts[it.modality];
  return counts;
}

}  // namespace

TEST_CASE("balanced_subset divisible case") {
  auto items = grouped_items({{"ct", 100}, {"mri", 100}, {"oct", 100}});
  auto out = balanced_subset(items, 9, 1, GroupBy::kModality);
  auto counts = count_by_modality(out);
  CHECK(counts["ct"] == 3);
  CHECK(counts["mri"] == 3);
  CHECK(counts["oct"] == 3);
}

TEST_CASE("balanced_subset shortage case {2,100,100}/30 -> {2,14,14}") {
  auto items = grouped_items({{"a", 2}, {"b", 100}, {"c", 100}});
  auto out = balanced_subset(items, 30, 7, GroupBy::kModality);
  auto counts = count_by_modality(out);
  CHECK(counts["a"] == 2);
  CHECK(counts["b"] == 14);
  CHECK(counts["c"] == 14);
  CHECK(out.size() == 30);

  auto ref = reference_quotas({{"a", 2}, {"b", 100}, {"c", 100}}, 30);
  CHECK(counts["a"] == ref["a"]);
  CHECK(counts["b"] == ref["b"]);
  CHECK(counts["c"] == ref["c"]);
}

TEST_CASE("balanced_subset matches the reference on random group layouts") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    std::map<std::string, int> sizes;
    int n_groups = 2 + int(rng() % 5);
    int total_avail = 0;
    for (int gidx = 0; gidx < n_groups; ++gidx) {
      int size = 1 + int(rng() % 40);
      sizes["g" + std::to_string(gidx)] = size;
      total_avail += size;
    }
    int total_n = n_groups + int(rng() % std::max(1, total_avail - n_groups + 1));
    auto items = grouped_items(sizes);
    auto out = balanced_subset(items, total_n, trial, GroupBy::kModality);
    CHECK(int(out.size()) == total_n);
    auto counts = count_by_modality(out);
    auto ref = reference_quotas(sizes, total_n);
    for (const auto& [name, want] : ref) {
      CAPTURE(trial);
      CAPTURE(name);
      CHECK(counts[name] == want);
    }
  }
}

TEST_CASE("balanced_subset group counts differ by at most one under full supply") {
  auto items = grouped_items({{"a", 50}, {"b", 50}, {"c", 50}, {"d", 50}});
  auto out = balanced_subset(items, 10, 3, GroupBy::kModality);
  auto counts = count_by_modality(out);
  int lo = 1000, hi = 0;
  for (auto& [_, c] : counts) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  CHECK(hi - lo <= 1);
  CHECK(out.size() == 10);
}

TEST_CASE("balanced_subset determinism and output ordering") {
  auto items = grouped_items({{"x", 30}, {"y", 30}});
  auto a = balanced_subset(items, 12, 42, GroupBy::kModality);
  auto b = balanced_subset(items, 12, 42, GroupBy::kModality);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].item_id == b[i].item_id);
  // sorted by (group, item_id)
  for (std::size_t i = 1; i < a.size(); ++i) {
    auto ka = std::pair(a[i - 1].modality, a[i - 1].item_id);
    auto kb = std::pair(a[i].modality, a[i].item_id);
    CHECK(ka < kb);
  }
  auto c = balanced_subset(items, 12, 43, GroupBy::kModality);
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i) same = same && a[i].item_id == c[i].item_id;
  CHECK_FALSE(same);  // different seed picks a different subset
}

TEST_CASE("balanced_subset excludes none-modality items and validates totals") {
  auto items = grouped_items({{"none", 50}, {"ct", 10}, {"mri", 10}});
  auto out = balanced_subset(items, 20, 1, GroupBy::kModality);
  auto counts = count_by_modality(out);
  CHECK(counts.count("none") == 0);
  CHECK(counts["ct"] == 10);
  CHECK(counts["mri"] == 10);

  // Availability after exclusion is 20, so 21 must fail and the error names
  // the per-group availability.
  try {
    balanced_subset(items, 21, 1, GroupBy::kModality);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("ct") != std::string::npos);
    CHECK(msg.find("10") != std::string::npos);
  }

  CHECK_THROWS_AS(balanced_subset(items, 1, 1, GroupBy::kModality),
                  ValidationError);  // below group count
}

TEST_CASE("balanced_subset can group by label") {
  // 2 labels with uneven supply; label grouping keys on the correct option's
  // class text, which survives option shuffling.
  std::vector<McqItem> items;
  for (int i = 0; i < 30; ++i) {
    McqItem it;
    it.item_id = "i" + std::to_string(i);
    it.task_id = "t";
    it.image_path = "x.png";
    it.question = "q";
    bool benign = i % 3 != 0;
    it.options = {{'A', benign ? "benign" : "malignant"}, {'B', benign ? "malignant" : "benign"}};
    it.correct_letter = 'A';
    it.modality = "none";
    items.push_back(it);
  }
  auto out = balanced_subset(items, 10, 9, GroupBy::kLabel);
  int benign_count = 0;
  for (const auto& it : out) {
    if (it.options[0].text == "benign") ++benign_count;
  }
  CHECK(benign_count == 5);
  CHECK(out.size() == 10);
}

TEST_CASE("mcq item JSONL round-trip") {
  testutil::TempDir dir;
  auto item = testutil::make_item("img.png", "it1", 'B', 3, "task", "ct");
  item.shuffle_seed_used = 77;
  auto line = mcq_item_to_json_line(item);
  auto back = mcq_item_from_json_line(line);
  CHECK(back.item_id == item.item_id);
  CHECK(back.task_id == item.task_id);
  CHECK(back.question == item.question);
  REQUIRE(back.options.size() == 3);
  CHECK(back.options[1].letter == 'B');
  CHECK(back.options[1].text == "class1");
  CHECK(back.correct_letter == 'B');
  CHECK(back.modality == "ct");
  CHECK(back.shuffle_seed_used == 77);

  auto path = dir.file("items.jsonl");
  write_mcq_items(path, {item, item});
  auto items = read_mcq_items(path);
  CHECK(items.size() == 2);
}

TEST_CASE("apply_modality_tags overrides item modalities") {
  std::vector<McqItem> items = grouped_items({{"none", 3}});
  std::vector<ModalityTag> tags{{items[0].item_id, "ct", "CT"},
                                {items[2].item_id, "none", "unsure"}};
  apply_modality_tags(items, tags);
  CHECK(items[0].modality == "ct");
  CHECK(items[1].modality == "none");
  CHECK(items[2].modality == "none");
}
