#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reparam/types.hpp"

namespace reparam::cli {

/// Flat "key = value" experiment configuration. Keys are dotted paths such as
/// parametrization.family or loss.segments[0].type; '#' starts a comment.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& source = "<string>");
  static Config load(const std::string& path);

  // "key=value" override; replaces or adds.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string str(const std::string& key) const;
  std::string str(const std::string& key, const std::string& fallback) const;
  double real(const std::string& key) const;
  double real(const std::string& key, double fallback) const;
  long long integer(const std::string& key) const;
  long long integer(const std::string& key, long long fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  // Comma- or whitespace-separated reals.
  Vector vector(const std::string& key) const;
  std::optional<Vector> vector_opt(const std::string& key) const;
  // Rows separated by ';'.
  Matrix matrix(const std::string& key) const;
  std::vector<long long> integers(const std::string& key) const;

  // Number of consecutive indexed groups prefix[0], prefix[1], ...
  std::size_t count_indexed(const std::string& prefix) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  std::string canonical() const;
  std::string hash() const;  // FNV-1a 64 of canonical(), hex
  std::vector<std::string> unused_keys() const;
  std::string where(const std::string& key) const;  // "file:line" or "override"

 private:
  const std::string& raw(const std::string& key) const;

  std::map<std::string, std::string> entries_;
  std::map<std::string, std::string> origin_;
  // Shared by copies so that keys read through any copy count as used.
  struct Usage {
    std::mutex mutex;
    std::set<std::string> keys;
  };
  std::shared_ptr<Usage> usage_ = std::make_shared<Usage>();
};

}  // namespace reparam::cli
