#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "capgen/corpus.hpp"
#include "capgen/fileio.hpp"
#include "capgen/genclient.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return CAPGEN_TEST_DATA_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "capgen-test") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (prefix + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  capgen::write_file_atomic(path, text);
}

/// Train entries "img-000".."img-(n-1)"; mirrored by tests/golden/pinned_shuffle.py.
inline capgen::Corpus make_train_fixture(int n) {
  std::vector<capgen::CorpusEntry> entries;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "img-%03d", i);
    capgen::CorpusEntry e;
    e.image_id = id;
    e.article_id = "art-" + std::to_string(i / 2);
    e.description = "Description number " + std::to_string(i) + " of a test image.";
    e.context = "Context paragraph " + std::to_string(i) + " about article " + std::to_string(i / 2) + ".";
    e.caption = "Caption " + std::to_string(i) + ".";
    e.split = capgen::Split::kTrain;
    entries.push_back(std::move(e));
  }
  return capgen::Corpus(std::move(entries), "fixture");
}

/// Counts calls; returns the mapped completion or fails as scripted.
class CountingBackend : public capgen::CompletionBackend {
 public:
  std::function<std::string(const capgen::GenerationRequest&, std::string_view, int)> respond;
  std::atomic<int> calls{0};

  std::string complete(const capgen::GenerationRequest& request, std::string_view image_id) override {
    const int n = ++calls;
    return respond(request, image_id, n);
  }
};

}  // namespace testing
