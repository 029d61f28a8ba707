#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace treatsel {

// Status values line up with the CLI exit codes.
enum class Status {
  Ok = 0,
  Internal = 1,
  ConfigError = 2,
  Infeasible = 3,
  DataError = 4,
};

class Error : public std::runtime_error {
 public:
  Error(Status s, std::string msg) : std::runtime_error(std::move(msg)), status_(s) {}
  Status status() const noexcept { return status_; }

  static Error config(std::string msg) { return {Status::ConfigError, std::move(msg)}; }
  static Error data(std::string msg) { return {Status::DataError, std::move(msg)}; }
  static Error infeasible(std::string msg) { return {Status::Infeasible, std::move(msg)}; }
  static Error internal(std::string msg) { return {Status::Internal, std::move(msg)}; }

 private:
  Status status_;
};

// splitmix64 finalizer; good enough to decorrelate derived seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(mix64(seed) ^ mix64(tag ^ 0xa076'1d64'78bd'642fULL));
}

inline std::uint64_t tag_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return derive_seed(seed, tag_hash(tag));
}

}  // namespace treatsel
