// SPDX-License-Identifier: Apache-2.0
// Small fixtures shared by the unit tests.
#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "labelcost/data_pool.hpp"
#include "labelcost/money.hpp"

namespace testing {

inline labelcost::Money dollars(const char* text) { return labelcost::Money::parse(text); }

inline labelcost::UnlabeledExample example(std::string id, std::string text,
                                           std::optional<std::string> gold = std::nullopt) {
  const std::size_t n = labelcost::token_count(text);
  return {std::move(id), std::move(text), n, std::move(gold)};
}

/// Binary pool of `n` items "id-0000".., gold alternating Negative/Positive.
inline labelcost::Pool binary_pool(std::size_t n, std::optional<double> avg_tokens = 19.3) {
  std::vector<labelcost::UnlabeledExample> xs;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "id-%04zu", i);
    xs.push_back(example(id, "text number " + std::to_string(i), i % 2 ? "Positive" : "Negative"));
  }
  return labelcost::Pool(std::move(xs), labelcost::TaskKind::kClassification,
                         std::vector<std::string>{"Negative", "Positive"}, avg_tokens);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("labelcost-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const auto p = file(name);
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace testing
