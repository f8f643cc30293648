#ifndef ASOTE_TESTS_SUPPORT_HPP
#define ASOTE_TESTS_SUPPORT_HPP

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef ASOTE_FIXTURE_DIR
#error "build must define ASOTE_FIXTURE_DIR"
#endif

namespace testsup {

inline std::string fixture_path(const std::string& name) {
  return std::string(ASOTE_FIXTURE_DIR) + "/" + name;
}

/// Fresh empty directory under the system temp root; never reused within a
/// process.
inline std::string make_temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("asote-test-" + tag + "-" +
                    std::to_string(static_cast<long long>(::getpid())) + "-" +
                    std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline std::string write_file(const std::string& dir, const std::string& name,
                              const std::string& content) {
  const std::string path = dir + "/" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

}  // namespace testsup

#endif  // ASOTE_TESTS_SUPPORT_HPP
