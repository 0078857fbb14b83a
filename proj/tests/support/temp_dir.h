#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

namespace testing_support {

class temp_dir {
public:
  explicit temp_dir(std::string const& tag = "t") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("delayprof_" + tag + "_" + std::to_string(rd()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~temp_dir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  temp_dir(temp_dir const&) = delete;
  temp_dir& operator=(temp_dir const&) = delete;

  std::filesystem::path const& path() const { return path_; }
  std::filesystem::path operator/(std::string const& name) const {
    return path_ / name;
  }

private:
  std::filesystem::path path_;
};

}  // namespace testing_support
