#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ibp::harness {

/// Ingestion failure carrying the file and (1-based) line it refers to.
class InputError : public std::runtime_error {
 public:
  InputError(const std::filesystem::path& file, std::size_t line, const std::string& what);
  InputError(const std::filesystem::path& file, const std::string& what);
  const std::filesystem::path& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::filesystem::path file_;
  std::size_t line_ = 0;
};

using WarningSink = std::function<void(const std::string&)>;

/// Default sink: one line on stderr.
void warn_stderr(const std::string& message);

/// Writes to a sibling temporary file, then renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Calls fn(line_number, line) for every line, stripping a trailing '\r'.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& fn);

}  // namespace ibp::harness
